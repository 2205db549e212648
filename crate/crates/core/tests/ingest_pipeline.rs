use gridcurate::config::{parse_config, Precision};
use gridcurate::ingest::{load_dataset, write_dataset_raw};
use gridcurate::samplers::run_pipeline_with;
use gridcurate::synthetic::gen_taylor_green;
use gridcurate::GridDims;

#[test]
fn generated_files_load_and_sample() {
    let dir = tempfile::tempdir().unwrap();
    let dims = GridDims::new(32, 32, 32, 2).unwrap();
    let ds = gen_taylor_green(dims, 0.0).unwrap();
    let files = write_dataset_raw(&ds, dir.path(), Precision::F64).unwrap();
    assert_eq!(files.len(), 4 * 2);
    for f in &files {
        assert_eq!(std::fs::metadata(f).unwrap().len(), 32 * 32 * 32 * 8);
    }

    let cfg = parse_config(&format!(
        "shared:\n  dims: 3\n  nx: 32\n  ny: 32\n  nz: 32\n  input_vars: [u, v, w]\n  cluster_var: wz\n\
         subsample:\n  path: {}\n  num_hypercubes: 3\n  nxsl: 16\n  nysl: 16\n  nzsl: 16\n  num_samples: 100\n",
        dir.path().display()
    ))
    .unwrap();
    let loaded = load_dataset(&cfg).unwrap();
    assert_eq!(loaded.timesteps(), &[0, 1]);
    assert_eq!(loaded.field("wz").unwrap(), ds.field("wz").unwrap());

    let set = run_pipeline_with(&cfg, &loaded, 5, 2).unwrap();
    assert_eq!(set.len(), 2 * 3 * 100);
    let direct = run_pipeline_with(&cfg, &ds, 5, 1).unwrap();
    assert!(set.same_output(&direct));
}

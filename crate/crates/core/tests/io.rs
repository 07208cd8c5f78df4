mod common;

use std::collections::BTreeMap;
use std::fs;

use common::{normal, random_qb, rng};
use nalgebra::DVector;
use qbmor_core::io::{load_reduced, load_system, read_manifest, save_reduced, save_system, Kind};
use qbmor_core::irka::{tqb_irka, IrkaConfig};
use qbmor_core::models::{chafee_infante, fitzhugh_nagumo};
use qbmor_core::{Error, QBSystem};

fn assert_same(a: &QBSystem, b: &QBSystem) {
    assert_eq!(a.a(), b.a());
    assert_eq!(a.b(), b.b());
    assert_eq!(a.c(), b.c());
    assert_eq!(a.n_mats(), b.n_mats());
    assert_eq!(a.e(), b.e());
    assert_eq!(a.h().to_dense(), b.h().to_dense());
    let mut g = rng(1);
    for _ in 0..5 {
        let x = DVector::from_column_slice(normal(&mut g, a.n(), 1).as_slice());
        let u = DVector::from_column_slice(normal(&mut g, a.m(), 1).as_slice());
        assert_eq!(a.rhs(&x, &u), b.rhs(&x, &u));
    }
}

#[test]
fn benchmark_models_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for (name, sys) in [("ci", chafee_infante(12).unwrap()), ("fhn", fitzhugh_nagumo(6).unwrap())] {
        let path = dir.path().join(name);
        save_system(&path, &sys, Kind::Full, BTreeMap::new()).unwrap();
        let (back, mf) = load_system(&path).unwrap();
        assert_eq!((mf.n, mf.m, mf.p), (sys.n(), sys.m(), sys.p()));
        assert_eq!(mf.hessian.storage, "factored");
        assert_same(&sys, &back);
    }
}

#[test]
fn dense_hessian_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let sys = random_qb(3, 5, 2, 2, 0.5, 0.5);
    save_system(dir.path(), &sys, Kind::Full, BTreeMap::new()).unwrap();
    let (back, mf) = load_system(&dir.path().join("system.toml")).unwrap();
    assert_eq!(mf.hessian.storage, "mode1");
    assert_same(&sys, &back);
}

#[test]
fn reduced_model_round_trips_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let sys = chafee_infante(20).unwrap();
    let mut cfg = IrkaConfig::new(4);
    cfg.gamma = 0.01;
    let (red, _, _) = tqb_irka(&sys, &cfg).unwrap();
    let meta = BTreeMap::from([("method".to_string(), "tqb-irka".to_string())]);
    save_reduced(dir.path(), &red, meta.clone()).unwrap();
    let (back, mf) = load_reduced(dir.path()).unwrap();
    assert_eq!(mf.kind, Kind::Reduced);
    assert_eq!(mf.meta, meta);
    assert_same(red.system(), back.system());
}

#[test]
fn saving_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sys = chafee_infante(8).unwrap();
    save_system(a.path(), &sys, Kind::Full, BTreeMap::new()).unwrap();
    save_system(b.path(), &sys, Kind::Full, BTreeMap::new()).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for f in names {
        assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap());
    }
}

#[test]
fn large_mode1_hessian_loads_factored() {
    let dir = tempfile::tempdir().unwrap();
    let sys = chafee_infante(100).unwrap();
    let h = qbmor_core::Hessian::dense(sys.h().to_dense()).unwrap();
    let dense = QBSystem::new(sys.a().clone(), h, sys.n_mats().to_vec(), sys.b().clone(), sys.c().clone(), None).unwrap();
    save_system(dir.path(), &dense, Kind::Full, BTreeMap::new()).unwrap();
    let (back, _) = load_system(dir.path()).unwrap();
    assert!(matches!(back.h().storage(), qbmor_core::hessian::Storage::Factored(_)));
    let mut g = rng(5);
    let x = DVector::from_column_slice(normal(&mut g, 200, 1).as_slice());
    let (u, v) = (sys.h().apply(&x, &x), back.h().apply(&x, &x));
    assert!((&u - &v).norm() <= 1e-14 * u.norm());
}

#[test]
fn bad_manifests_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_system(dir.path()), Err(Error::Io(_))));
    fs::write(dir.path().join("system.toml"), "format = \"other\"\n").unwrap();
    assert!(matches!(read_manifest(dir.path()), Err(Error::Parse(_))));
    let sys = chafee_infante(4).unwrap();
    save_system(dir.path(), &sys, Kind::Full, BTreeMap::new()).unwrap();
    let text = fs::read_to_string(dir.path().join("system.toml")).unwrap().replace("n = 8", "n = 9");
    fs::write(dir.path().join("system.toml"), text).unwrap();
    assert!(matches!(load_system(dir.path()), Err(Error::Dimension(_))));
}

use kpp_cascade::experiments::*;
use kpp_cascade::table::{emit_csv, read_csv};

#[test]
fn recipe_registry_is_complete() {
    let crits: Vec<u32> = RECIPES.iter().map(|r| r.criterion).collect();
    assert_eq!(crits, (1..=11).collect::<Vec<_>>());
    assert!(find_recipe("bramson").is_some());
    assert!(run_recipe("bramsen", &Session::new(1)).is_err());
}

#[test]
fn reruns_are_identical() {
    let a = run_recipe("traveling-wave", &Session::new(5)).unwrap();
    let b = run_recipe("traveling-wave", &Session::new(5)).unwrap();
    assert!(a.passed());
    assert_eq!(a.to_json(), b.to_json());
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = vec![];
    for o in [&a, &b] {
        let Artifact::Csv { table, .. } = &o.artifacts[0] else { panic!("profile first") };
        let p = dir.path().join("p.csv");
        emit_csv(&p, "cfg", table).unwrap();
        bytes.push(std::fs::read(&p).unwrap());
        assert_eq!(&read_csv(&p).unwrap().1, table);
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn heuristic_ratio_approaches_alpha_c() {
    let o = run_recipe("heuristic", &Session::new(0)).unwrap();
    assert!(o.passed(), "{}", o.summary());
    // the ratio's limit is alpha C with C = int y omega0 / (2 sqrt(pi))
    let r = o.info["ratio[t=400]"];
    assert!((r / o.info["alpha_C"] - 1.0).abs() < 0.01);
}

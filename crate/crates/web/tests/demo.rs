use serde_json::Value;
use spmvlab_web::{simulate, size_sweep, sparsity_pattern};

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.expect("demo call succeeds")).unwrap()
}

#[test]
fn pattern_counts_every_nonzero_once() {
    for spec in ["fd9:8", "rmat:9:3", "rmat:9:3:perm"] {
        let v = parse(sparsity_pattern(spec, 32));
        let counts: Vec<u64> = v["counts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c.as_u64().unwrap())
            .collect();
        assert_eq!(counts.len(), 32 * 32);
        assert_eq!(
            counts.iter().sum::<u64>(),
            v["nnz"].as_u64().unwrap(),
            "{spec}"
        );
        assert_eq!(counts.iter().max().copied(), v["max"].as_u64());
    }
}

#[test]
fn fd_pattern_stays_near_the_diagonal_band() {
    let v = parse(sparsity_pattern("fd9:10", 32));
    let counts = v["counts"].as_array().unwrap();
    for (k, c) in counts.iter().enumerate() {
        let (r, col) = (k / 32, k % 32);
        let d = r.abs_diff(col);
        // Torus wrap puts the far corners in the band too.
        if d > 1 && d < 31 {
            assert_eq!(c.as_u64(), Some(0), "cell ({r},{col})");
        }
    }
}

#[test]
fn simulation_levels_chain_and_l3_switch_works() {
    let v = parse(simulate("rmat:10:1:perm", "desk", 2, true, true));
    let levels = v["levels"].as_array().unwrap();
    assert_eq!(levels[1]["accesses"], levels[0]["misses"]);
    assert_eq!(levels[2]["accesses"], levels[1]["misses"]);
    let l2_by_stream: u64 = v["streams"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["l2_misses"].as_u64().unwrap())
        .sum();
    assert_eq!(l2_by_stream, levels[1]["misses"].as_u64().unwrap());

    let off = parse(simulate("rmat:10:1:perm", "desk", 2, true, false));
    assert_eq!(off["levels"][2]["accesses"], 0);
    assert_eq!(off["l3_miss_rate"], 0.0);
}

#[test]
fn sweep_shows_rmat_rate_rising_past_l2() {
    let v = parse(size_sweep("rmat", 6, 11, 1, "desk", true));
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 6);
    let rate = |i: usize| points[i]["l2_miss_rate"].as_f64().unwrap();
    assert!(rate(5) > 5.0 * rate(0), "{} vs {}", rate(5), rate(0));
    assert_eq!(v["l2_bytes"], 8 * 1024);

    let fd = parse(size_sweep("fd9", 6, 11, 1, "desk", true));
    let fd_last = fd["points"][5]["l2_miss_rate"].as_f64().unwrap();
    assert!(fd_last < 0.1 * rate(5));
}

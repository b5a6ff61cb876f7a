mod common;

use common::reference_config;
use kvshare_sim::metrics::{RequestAggregates, CSV_HEADER};
use kvshare_sim::{simulate, ServingMode};
use serde_json::Value;

fn nearest_rank(mut v: Vec<u64>, p: f64) -> u64 {
    v.sort();
    let k = (p / 100.0 * v.len() as f64).ceil() as usize;
    v[k.max(1) - 1]
}

#[test]
fn written_aggregates_match_records() {
    let mut cfg = reference_config("react.toml");
    cfg.workload.duration_s = 10.0;
    cfg.fleet.max_concurrent_sessions = Some(30);
    for mode in ServingMode::ALL {
        cfg.run.mode = mode;
        let report = simulate(&cfg, false).unwrap().report;
        let tmp = tempfile::tempdir().unwrap();
        report.write_to_dir(tmp.path()).unwrap();
        let json: Value =
            serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap())
                .unwrap();
        let csv = std::fs::read_to_string(tmp.path().join("requests.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let rows: Vec<Vec<u64>> = lines
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();

        let req = &json["requests"];
        assert_eq!(json["schema_version"], 1);
        assert_eq!(req["completed_requests"].as_u64().unwrap(), rows.len() as u64);
        let out: u64 = rows.iter().map(|r| r[5]).sum();
        assert_eq!(req["output_tokens"].as_u64().unwrap(), out);
        let ttft: Vec<u64> = rows.iter().map(|r| r[3]).collect();
        let e2e: Vec<u64> = rows.iter().map(|r| r[4]).collect();
        assert_eq!(req["p95_ttft_us"].as_u64().unwrap(), nearest_rank(ttft.clone(), 95.0));
        assert_eq!(req["p95_e2e_us"].as_u64().unwrap(), nearest_rank(e2e.clone(), 95.0));
        let mean = |v: &[u64]| v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
        assert_eq!(req["mean_ttft_us"].as_f64().unwrap(), mean(&ttft));
        assert_eq!(req["mean_e2e_us"].as_f64().unwrap(), mean(&e2e));

        // Throughput needs token times, which only the in-memory records carry.
        let again = RequestAggregates::from_records(&report.records, report.requests.end_us, 0.1);
        assert_eq!(again, report.requests);
        let end = report.requests.end_us as f64;
        let n = report
            .records
            .iter()
            .flat_map(|r| r.token_times())
            .filter(|&t| t as f64 >= 0.1 * end)
            .count();
        assert_eq!(report.requests.throughput_tok_s, n as f64 / (0.9 * end / 1e6));

        let cache = &json["cache"];
        let (m, l) = (cache["matched_tokens"].as_u64().unwrap(), cache["lookup_tokens"].as_u64().unwrap());
        assert_eq!(cache["hit_ratio"].as_f64().unwrap(), m as f64 / l as f64);
        assert_eq!(json["mode"], mode.as_str());
        assert_eq!(json["fleet"]["failed_requests"], 0);
    }
}

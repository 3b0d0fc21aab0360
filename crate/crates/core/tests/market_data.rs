mod common;

use std::path::PathBuf;
use std::time::Duration;

use chrono::NaiveDate;
use common::http::{dead_url, FixtureServer};
use proptest::prelude::*;
use sarf::market_data::{
    parse_bars_csv, write_bars_csv, AlphaVantageClient, AlphaVantageConfig, Bar, BarSeries,
    MarketDataError,
};

fn recorded(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/alphavantage")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

fn quick_config(url: &str) -> AlphaVantageConfig {
    AlphaVantageConfig {
        base_url: url.to_string(),
        min_interval: Duration::ZERO,
        max_attempts: 3,
        backoff: Duration::from_millis(5),
        timeout: Duration::from_secs(5),
    }
}

#[test]
fn fetch_writes_cache_that_parses_back() {
    let server = FixtureServer::start(vec![(200, recorded("daily_ok.json"))]);
    let dir = tempfile::tempdir().unwrap();
    let mut client = AlphaVantageClient::new(quick_config(&server.url));
    let out = client.fetch_daily("spy", "KEY123", dir.path()).unwrap();
    let requests = server.finish();

    assert!(!out.stale);
    assert_eq!(out.series.len(), 5);
    assert_eq!(out.series.bars()[0].date, NaiveDate::from_ymd_opt(2024, 1, 3).unwrap());
    assert_eq!(out.series.bars()[4].close, 473.88);
    assert_eq!(out.cache_path, dir.path().join("SPY.csv"));
    let text = std::fs::read_to_string(&out.cache_path).unwrap();
    assert_eq!(parse_bars_csv("SPY", &text).unwrap(), out.series);

    let line = &requests[0].request_line;
    assert!(line.contains("function=TIME_SERIES_DAILY"), "{line}");
    assert!(line.contains("symbol=SPY") && line.contains("apikey=KEY123"), "{line}");
}

#[test]
fn rate_limit_notes_are_retried() {
    let server = FixtureServer::start(vec![
        (200, recorded("note.json")),
        (200, recorded("information.json")),
        (200, recorded("daily_ok.json")),
    ]);
    let dir = tempfile::tempdir().unwrap();
    let mut client = AlphaVantageClient::new(quick_config(&server.url));
    let out = client.fetch_daily("SPY", "k", dir.path()).unwrap();
    assert_eq!(server.finish().len(), 3);
    assert!(!out.stale);
    assert_eq!(out.series.len(), 5);
}

#[test]
fn rate_limit_exhaustion_is_an_error() {
    let server = FixtureServer::start(vec![(200, recorded("note.json")), (200, recorded("note.json"))]);
    let dir = tempfile::tempdir().unwrap();
    let mut client = AlphaVantageClient::new(AlphaVantageConfig {
        max_attempts: 2,
        ..quick_config(&server.url)
    });
    let err = client.fetch_daily("SPY", "k", dir.path()).unwrap_err();
    server.finish();
    assert!(matches!(err, MarketDataError::RateLimited { attempts: 2, .. }), "{err}");
    assert!(err.is_remote());
}

#[test]
fn api_error_is_verbatim_without_cache() {
    let server = FixtureServer::start(vec![(200, recorded("error.json"))]);
    let dir = tempfile::tempdir().unwrap();
    let mut client = AlphaVantageClient::new(quick_config(&server.url));
    let err = client.fetch_daily("SPY", "bad", dir.path()).unwrap_err();
    server.finish();
    assert!(err.to_string().starts_with("Invalid API call. Please retry"), "{err}");
    assert!(!dir.path().join("SPY.csv").exists());
}

#[test]
fn offline_falls_back_to_stale_cache() {
    let dir = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(vec![(200, recorded("daily_ok.json"))]);
    let fresh = AlphaVantageClient::new(quick_config(&server.url))
        .fetch_daily("SPY", "k", dir.path())
        .unwrap();
    server.finish();

    let mut offline = AlphaVantageClient::new(quick_config(&dead_url()));
    let out = offline.fetch_daily("SPY", "k", dir.path()).unwrap();
    assert!(out.stale);
    assert!(out.warning.as_deref().unwrap().contains("http request failed"));
    assert_eq!(out.series, fresh.series);

    let empty = tempfile::tempdir().unwrap();
    let err = offline.fetch_daily("SPY", "k", empty.path()).unwrap_err();
    assert!(matches!(err, MarketDataError::Http(_)));
}

#[test]
fn server_error_status_is_remote() {
    let server = FixtureServer::start(vec![(503, "{}".into())]);
    let dir = tempfile::tempdir().unwrap();
    let err = AlphaVantageClient::new(quick_config(&server.url))
        .fetch_daily("SPY", "k", dir.path())
        .unwrap_err();
    server.finish();
    assert!(err.is_remote(), "{err}");
}

#[test]
fn bundled_fixture_is_valid() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/bars_2200.csv");
    let series = sarf::market_data::read_bars_csv("SPY", &path).unwrap();
    assert_eq!(series.len(), 2200);
}

fn arb_bars() -> impl Strategy<Value = Vec<Bar>> {
    prop::collection::vec(
        (1e-3f64..1e5, 0.0f64..0.2, 0.0f64..0.2, 0.0f64..1.0, 0.0f64..1e9, 1u64..5),
        1..60,
    )
    .prop_map(|raw| {
        let mut date = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
        raw.into_iter()
            .map(|(base, up, down, mix, volume, gap)| {
                date = date + chrono::Days::new(gap);
                let high = base * (1.0 + up);
                let low = base * (1.0 - down);
                let open = low + (high - low) * mix;
                let close = low + (high - low) * (1.0 - mix);
                Bar {
                    date,
                    open,
                    high,
                    low,
                    close,
                    volume: volume.floor(),
                }
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn csv_round_trip_is_identity(bars in arb_bars()) {
        let series = BarSeries::new("T", bars).unwrap();
        let text = write_bars_csv(&series);
        let back = parse_bars_csv("T", &text).unwrap();
        prop_assert_eq!(&back, &series);
        prop_assert_eq!(write_bars_csv(&back), text);
    }

    #[test]
    fn violated_invariants_name_the_row(bars in arb_bars(), pick in any::<prop::sample::Index>()) {
        let i = pick.index(bars.len());
        let mut broken = bars.clone();
        broken[i].low = broken[i].high * 1.5;
        let series_text = {
            let mut s = String::from("date,open,high,low,close,volume\n");
            for b in &broken {
                s.push_str(&format!("{},{},{},{},{},{}\n", b.date, b.open, b.high, b.low, b.close, b.volume));
            }
            s
        };
        match parse_bars_csv("T", &series_text) {
            Err(MarketDataError::Invariant { row, .. }) => prop_assert_eq!(row, i + 2),
            other => prop_assert!(false, "expected invariant error, got {:?}", other),
        }
    }
}

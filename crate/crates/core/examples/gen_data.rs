//! Regenerates the bundled traces and fleet files under `scenarios/`.
//!
//! ```text
//! cargo run -p regsim-core --example gen_data -- scenarios
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use regsim_core::signal::{synthetic_building, synthetic_pv, synthetic_regd};

pub const REGD_SEED: u64 = 2019;
pub const PV_SEED: u64 = 2020;
pub const BUILDING_SEED: u64 = 2021;

struct Group {
    prefix: &'static str,
    der_type: &'static str,
    rating_kw: f64,
    period_s: usize,
    delay_s: usize,
    settle_s: f64,
    spike_rate: f64,
    spikes_kw: (f64, f64),
    integer_kw: bool,
}

const HEADER: &str = "id,node,type,rating_kw,update_period_s,offset_s,delay_s,settle_s,spike_rate,spike_min_kw,spike_max_kw,integer_kw\n";

fn row(out: &mut String, g: &Group, index: usize, node: usize, offset: usize) {
    let _ = writeln!(
        out,
        "{}{:02},C{},{},{},{},{},{},{},{},{},{},{}",
        g.prefix,
        index,
        node,
        g.der_type,
        g.rating_kw,
        g.period_s,
        offset,
        g.delay_s,
        g.settle_s,
        g.spike_rate,
        g.spikes_kw.0,
        g.spikes_kw.1,
        g.integer_kw
    );
}

/// Air handlers split across C1 and C2 with offsets spread over the minute,
/// alternating nodes so each node refreshes every few seconds.
fn ahus(out: &mut String, g: &Group, count: usize) {
    for j in 0..count {
        let node = if j % 2 == 0 { 1 } else { 2 };
        row(out, g, j + 1, node, j * g.period_s / count);
    }
}

/// Five node slots C4..C8 for V2G, doubling up on C4 when there are six.
fn v2gs(out: &mut String, g: &Group, count: usize) {
    for j in 0..count {
        let node = if count > 5 {
            if j < 2 {
                4
            } else {
                j + 3
            }
        } else {
            j + 4
        };
        row(out, g, j + 1, node, 0);
    }
}

#[allow(clippy::too_many_arguments)]
fn fleet(
    ahu: (usize, usize, f64, (f64, f64)),
    v1g: (usize, f64, usize, usize, f64, Vec<usize>, bool),
    v2g: (usize, usize, f64),
    bess_delay: usize,
) -> String {
    let mut s = String::from(HEADER);
    let (n_ahu, ahu_delay, ahu_rate, ahu_spikes) = ahu;
    ahus(
        &mut s,
        &Group {
            prefix: "ahu",
            der_type: "AHU",
            rating_kw: 2.0,
            period_s: 60,
            delay_s: ahu_delay,
            settle_s: 0.0,
            spike_rate: ahu_rate,
            spikes_kw: ahu_spikes,
            integer_kw: false,
        },
        n_ahu,
    );
    let (n_v1g, rating, period, delay, settle, offsets, integer_kw) = v1g;
    let g = Group {
        prefix: "v1g",
        der_type: "V1G",
        rating_kw: rating,
        period_s: period,
        delay_s: delay,
        settle_s: settle,
        spike_rate: 0.0,
        spikes_kw: (0.0, 0.0),
        integer_kw,
    };
    for j in 0..n_v1g {
        row(&mut s, &g, j + 1, 3, offsets[j % offsets.len()]);
    }
    let (n_v2g, v2g_delay, v2g_settle) = v2g;
    v2gs(
        &mut s,
        &Group {
            prefix: "v2g",
            der_type: "V2G",
            rating_kw: 5.0,
            period_s: 1,
            delay_s: v2g_delay,
            settle_s: v2g_settle,
            spike_rate: 0.0,
            spikes_kw: (0.0, 0.0),
            integer_kw: false,
        },
        n_v2g,
    );
    row(
        &mut s,
        &Group {
            prefix: "bess",
            der_type: "BESS",
            rating_kw: 3.0,
            period_s: 20,
            delay_s: bess_delay,
            settle_s: 0.0,
            spike_rate: 0.0,
            spikes_kw: (0.0, 0.0),
            integer_kw: false,
        },
        1,
        9,
        0,
    );
    s
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
}

fn main() {
    let root = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "scenarios".into()),
    );
    let traces = root.join("traces");
    let fleets = root.join("fleets");
    std::fs::create_dir_all(&traces).expect("create traces dir");
    std::fs::create_dir_all(&fleets).expect("create fleets dir");

    synthetic_regd(REGD_SEED)
        .write_csv(&traces.join("regd.csv"))
        .expect("regd");
    synthetic_pv(PV_SEED)
        .write_csv(&traces.join("pv.csv"))
        .expect("pv");
    synthetic_building(BUILDING_SEED)
        .write_csv(&traces.join("building.csv"))
        .expect("building");

    let noisy = (0.002, (15.0, 30.0));
    write(
        &fleets.join("test0.csv"),
        &fleet(
            (7, 4, noisy.0, noisy.1),
            (4, 3.3, 300, 40, 5.0, vec![0], false),
            (5, 5, 1.0),
            0,
        ),
    );
    write(
        &fleets.join("test1.csv"),
        &fleet(
            (34, 4, noisy.0, noisy.1),
            (29, 3.3, 300, 40, 5.0, vec![0, 60, 120], false),
            (5, 5, 1.0),
            0,
        ),
    );
    write(
        &fleets.join("test2.csv"),
        &fleet(
            (34, 105, 0.0003, (15.0, 30.0)),
            (17, 4.9, 60, 10, 1.0, vec![15], false),
            (6, 3, 0.5),
            0,
        ),
    );
}

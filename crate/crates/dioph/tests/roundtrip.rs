//! Golden-file style checks: emitted CSV re-parses into exactly the values
//! the modules returned (floats print in shortest round-trip form).

use dioph::covering;
use dioph::curve::veronese;
use dioph::exponent;
use dioph::measure::{self, TruncatedLimsupConfig};
use dioph::point::{PointSpec, Shift};
use dioph::report;

fn parse_f64(cell: &str) -> f64 {
    match cell {
        "inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        other => other.parse().unwrap(),
    }
}

#[test]
fn exponent_csv_round_trips() {
    let x = PointSpec::parse("surd:(-1+1*sqrt5)/2").unwrap();
    let ests = vec![
        exponent::estimate_w0(&x, &Shift::zero(1), 500, 128).unwrap(),
        exponent::estimate_w0_uniform(&x, &Shift::zero(1), 512, 128).unwrap(),
        exponent::estimate_w0(&PointSpec::parse("rat:0").unwrap(), &Shift::zero(1), 100, 128).unwrap(),
    ];
    let csv = report::exponent_csv(&ests);
    let rows = report::parse_csv(&csv);
    assert_eq!(rows[0], vec!["kind", "n", "qmax", "running_sup", "tail_sup", "tail_inf_uniform", "rational_flag", "n_records"]);
    for (est, row) in ests.iter().zip(rows.iter().skip(1)) {
        assert_eq!(row[0], est.kind.as_str());
        assert_eq!(row[1].parse::<usize>().unwrap(), est.dimension);
        assert_eq!(row[2].parse::<i64>().unwrap(), est.qmax);
        assert_eq!(parse_f64(&row[3]).to_bits(), est.running_sup.to_bits());
        assert_eq!(parse_f64(&row[4]).to_bits(), est.tail_sup.to_bits());
        match est.tail_inf_uniform {
            Some(v) => assert_eq!(parse_f64(&row[5]).to_bits(), v.to_bits()),
            None => assert!(row[5].is_empty()),
        }
        assert_eq!(row[6].parse::<bool>().unwrap(), est.rational_flag);
        assert_eq!(row[7].parse::<usize>().unwrap(), est.records.len());
    }
}

#[test]
fn measure_csv_round_trips() {
    let cfg = TruncatedLimsupConfig {
        curve: veronese(2, 0.0, 1.0).unwrap(),
        theta: vec![0.3, 0.7],
        eps: 0.3,
        s_low: 1,
        qmax: 400,
        samples: 300,
        seed: 3,
    };
    let points = measure::tail_fraction_curve(&cfg, &[1, 10, 100]).unwrap();
    let csv = report::measure_csv(&points);
    let rows = report::parse_csv(&csv);
    for (p, row) in points.iter().zip(rows.iter().skip(1)) {
        assert_eq!(row[0].parse::<i64>().unwrap(), p.s);
        assert_eq!(row[1].parse::<i64>().unwrap(), p.qmax);
        assert_eq!(parse_f64(&row[2]).to_bits(), p.fraction.to_bits());
        assert_eq!(parse_f64(&row[3]).to_bits(), p.stderr_estimate.to_bits());
        assert_eq!(row[4].parse::<u64>().unwrap(), p.n_members);
    }
}

#[test]
fn cover_csvs_round_trip() {
    let curve = veronese(2, 0.0, 1.0).unwrap();
    let (decay, families) = covering::disjoint_sum_decay(&curve, &[0.3, 0.7], 0.4, 4..=5).unwrap();
    let balls_csv = report::cover_balls_csv(&families);
    let rows = report::parse_csv(&balls_csv);
    let total: usize = families.iter().map(|f| f.balls.len()).sum();
    assert_eq!(rows.len(), total + 1);
    // spot-check one row against the family data
    let fam = &families[0];
    let b = &fam.balls[0];
    let row = &rows[1];
    assert_eq!(row[0].parse::<u32>().unwrap(), fam.t);
    assert_eq!(row[1].parse::<i64>().unwrap(), b.ball.q);
    let p: Vec<i64> = row[2].split(';').map(|v| v.parse().unwrap()).collect();
    assert_eq!(p, b.ball.p);
    assert_eq!(parse_f64(&row[4]).to_bits(), b.measure_eps.to_bits());

    let summary = report::cover_summary_csv(&decay);
    let srows = report::parse_csv(&summary);
    assert_eq!(srows.len(), decay.rows.len() + 1);
    for (r, row) in decay.rows.iter().zip(srows.iter().skip(1)) {
        assert_eq!(row[0].parse::<u32>().unwrap(), r.t);
        assert_eq!(parse_f64(&row[1]).to_bits(), r.s_disjoint.to_bits());
        assert_eq!(parse_f64(&row[2]).to_bits(), r.bound.to_bits());
        assert_eq!(row[3].parse::<usize>().unwrap(), r.n_disjoint);
        assert_eq!(row[4].parse::<usize>().unwrap(), r.n_nondisjoint);
    }
}

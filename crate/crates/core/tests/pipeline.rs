use magbill::algebra::{ellipse_offset_report, SearchBudget};
use magbill::dynamics::LarmorState;
use magbill::geom::Circle;
use magbill::integrals::circle_integral;
use magbill::io::{write_orbit_csv, ORBIT_COLUMNS};
use magbill::{Billiard, Params, Vec2};

#[test]
fn orbit_csv_round_trips_the_integral() {
    let beta = 1.0 / 3.0;
    let bil = Billiard::new(Circle::centered(2.0), Params::new(beta).unwrap()).unwrap();
    let h = circle_integral(beta);
    let eval = |s: &LarmorState<f64>| h.eval(s.x, s.v);
    let orbit = bil.orbit(LarmorState::from_angle(Vec2::new(2.0, 0.0), 1.83), 50, Some(&eval));

    let mut buf = Vec::new();
    write_orbit_csv(&mut buf, &orbit.records).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ORBIT_COLUMNS);

    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 50);
    for (row, rec) in rows.iter().zip(&orbit.records) {
        let value: f64 = row[ORBIT_COLUMNS.len() - 1].parse().unwrap();
        // 17 significant digits survive the text round trip exactly
        assert_eq!(value, rec.integral_value.unwrap());
    }
}

#[test]
fn obstruction_report_json_is_self_consistent() {
    let budget = SearchBudget { n_starts: 200, ..SearchBudget::default() };
    let report = ellipse_offset_report(2.0, 1.0, 5.0, budget).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(v["verdict"], "obstructed_affine_singularity");
    let pts = v["affine_singular"].as_array().unwrap();
    assert_eq!(pts.len(), report.affine_singular_points.len());
    assert!(v["infinity"].as_array().is_some_and(|a| !a.is_empty()));
}

use std::path::Path;

use topocons::io::{
    diagram_csv, grid_csv, load_diagram, load_grid, load_mask, parse_csv_matrix, parse_diagram, parse_pgm,
    render_pgm, save_grid_csv, save_grid_pgm, Pgm,
};
use topocons::Error;
use topocons_core::{compute_diagram, Connectivity, Direction, LikelihoodGrid};

fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, bytes).unwrap();
    path
}

#[test]
fn ascii_pgm_rescales_by_maxval() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "g.pgm", b"P2\n# comment\n2 2\n255\n0 255\n128 0\n");
    let g = load_grid(&p).unwrap();
    assert_eq!(g.values(), &[0.0, 1.0, 128.0 / 255.0, 0.0]);
}

#[test]
fn binary_pgm_in_both_depths() {
    let narrow = Pgm { height: 1, width: 3, maxval: 255, samples: vec![0, 17, 255] };
    let wide = Pgm { height: 3, width: 1, maxval: 65535, samples: vec![0, 300, 65535] };
    for pgm in [narrow, wide] {
        for binary in [false, true] {
            let bytes = render_pgm(&pgm, binary);
            assert_eq!(parse_pgm(&bytes, Path::new("x.pgm")).unwrap(), pgm);
        }
    }
}

#[test]
fn pgm_errors_name_the_file() {
    let bad: [&[u8]; 5] = [
        b"P3\n1 1\n255\n0\n",
        b"P2\n2 2\n255\n0 1 2\n",
        b"P2\n1 1\n10\n11\n",
        b"P5\n2 2\n255\n\x00",
        b"P2\n0 1\n255\n",
    ];
    for bytes in bad {
        let err = parse_pgm(bytes, Path::new("bad.pgm")).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        assert!(err.to_string().starts_with("bad.pgm: "), "{err}");
    }
}

#[test]
fn csv_grids() {
    let (h, w, v) = parse_csv_matrix("0.1,0.9\n0.2,0.8\n", Path::new("g.csv")).unwrap();
    assert_eq!((h, w, v), (2, 2, vec![0.1, 0.9, 0.2, 0.8]));
    let err = parse_csv_matrix("0.1,0.9\n0.2", Path::new("g.csv")).unwrap_err();
    assert!(err.to_string().contains("non-rectangular"), "{err}");
    assert!(parse_csv_matrix("0.1,x\n", Path::new("g.csv")).is_err());
    assert!(parse_csv_matrix("\n\n", Path::new("g.csv")).is_err());
}

#[test]
fn out_of_range_values_report_the_pixel() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "g.csv", b"0.1,0.2\n1.5,0.3\n");
    let err = load_grid(&p).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let text = err.to_string();
    assert!(text.contains("g.csv") && text.contains("at pixel 2"), "{text}");
}

#[test]
fn csv_round_trip_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<f64> = (0..35).map(|k| ((k as f64) * 0.618_033_988_749_895).fract()).collect();
    let g = LikelihoodGrid::new(5, 7, values).unwrap();
    let p = dir.path().join("g.csv");
    save_grid_csv(&p, &g).unwrap();
    let back = load_grid(&p).unwrap();
    assert_eq!(back.dims(), g.dims());
    for (a, b) in g.values().iter().zip(back.values()) {
        assert!((a - b).abs() <= 1e-9);
    }
    assert_eq!(grid_csv(1, 2, &[0.5, 1.0]), "0.5,1\n");
}

#[test]
fn pgm_round_trip_quantises_to_sixteen_bits() {
    let dir = tempfile::tempdir().unwrap();
    let g = LikelihoodGrid::new(2, 2, vec![0.0, 0.25, 0.7, 1.0]).unwrap();
    let p = dir.path().join("g.pgm");
    save_grid_pgm(&p, &g).unwrap();
    let back = load_grid(&p).unwrap();
    for (a, b) in g.values().iter().zip(back.values()) {
        assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-15);
    }
}

#[test]
fn masks_treat_nonzero_as_foreground() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "m.pgm", b"P2\n3 1\n255\n0 1 255\n");
    assert_eq!(load_mask(&p).unwrap().bits(), &[false, true, true]);
    let c = write(dir.path(), "m.csv", b"0,2\n0.5,0\n");
    assert_eq!(load_mask(&c).unwrap().bits(), &[false, true, true, false]);
}

#[test]
fn diagram_csv_round_trip() {
    let g = LikelihoodGrid::new(3, 3, vec![0.1, 0.9, 0.2, 0.95, 0.97, 0.93, 0.6, 0.99, 0.05]).unwrap();
    for direction in [Direction::Sublevel, Direction::Superlevel] {
        let d = compute_diagram(&g, direction, Connectivity::Four).unwrap();
        let text = diagram_csv(&d);
        let back = parse_diagram(&text, Path::new("d.csv")).unwrap();
        assert_eq!(back.dots, d.dots);
        assert_eq!(back.direction, direction);
    }
    let d = compute_diagram(&g, Direction::Sublevel, Connectivity::Four).unwrap();
    let text = diagram_csv(&d);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("birth,death,birth_px,death_px,essential"));
    assert!(text.contains(",,1\n"), "essential row has an empty death_px: {text}");
}

#[test]
fn malformed_diagrams_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[u8]; 4] = [
        b"0.1,1,0,,1\n",
        b"birth,death,birth_px,death_px,essential\n0.1,1,0,3,1\n",
        b"birth,death,birth_px,death_px,essential\n0.1,1.2,0,,1\n",
        b"birth,death,birth_px,death_px,essential\n0.1,0.4,0\n",
    ];
    for (i, bytes) in cases.iter().enumerate() {
        let p = write(dir.path(), &format!("d{i}.csv"), bytes);
        assert!(load_diagram(&p).is_err(), "case {i}");
    }
}

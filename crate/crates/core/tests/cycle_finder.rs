use qhfocus::case_study::{UnfoldingFamily, RELAXED};
use qhfocus::cycles::{cycle_closure, find_cycles, ScanOptions, Stability, System};
use qhfocus::flow::SectionOptions;
use qhfocus::focal::Family;
use qhfocus::WeightedField;

const EPS: [f64; 2] = [7.015_437_540_089_91e-9, 1.615_867_006_656_11e-4];

fn hopf(eps: f64) -> WeightedField {
    WeightedField::new(1, 1)
        .x(1, 0, eps)
        .y(0, 1, eps)
        .x(3, 0, -1.0)
        .x(1, 2, -1.0)
        .y(2, 1, -1.0)
        .y(0, 3, -1.0)
}

#[test]
fn outer_cycles_survive_grid_refinement() {
    let system = System::polar(&UnfoldingFamily.field(&EPS).unwrap(), Default::default()).unwrap();
    let coarse = find_cycles(&system, &ScanOptions { h_min: 0.01, h_max: 0.4, grid: 48, ..Default::default() }).unwrap();
    let fine = find_cycles(&system, &ScanOptions { h_min: 0.01, h_max: 0.4, grid: 192, ..Default::default() }).unwrap();
    assert_eq!(coarse.count(), 2);
    assert_eq!(fine.count(), coarse.count());
    // Near these weak cycles |Delta| sits at the noise floor, which limits h* to about 1e-4.
    for (a, b) in coarse.cycles.iter().zip(&fine.cycles) {
        assert!((a.h_star - b.h_star).abs() < 1e-3 * a.h_star, "{} vs {}", a.h_star, b.h_star);
    }
    assert_eq!(coarse.cycles[0].stability, Stability::Stable);
    assert_eq!(coarse.cycles[1].stability, Stability::Unstable);
    for c in &coarse.cycles {
        let closure = cycle_closure(&system, c, &SectionOptions { tol: 1e-13, ..Default::default() }).unwrap();
        assert!(closure < 1e-8, "{closure:e}");
    }
}

#[test]
fn hopf_radius_scales_like_square_root() {
    let eps: Vec<f64> = (0..=8).map(|i| 1e-4 * 10f64.powf(i as f64 / 4.0)).collect();
    let radii: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let system = System::polar(&hopf(e), RELAXED).unwrap();
            let set = find_cycles(&system, &ScanOptions { h_min: 1e-3, h_max: 0.5, ..Default::default() }).unwrap();
            assert_eq!(set.count(), 1, "eps {e}");
            set.cycles[0].h_star
        })
        .collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = eps.iter().zip(&radii).map(|(e, r)| (e.ln(), r.ln())).unzip();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope - 0.5).abs() < 0.1, "slope {slope}");
}

#[test]
fn cartesian_backend_finds_the_same_outer_cycles() {
    let field = UnfoldingFamily.field(&EPS).unwrap();
    let polar = System::polar(&field, Default::default()).unwrap();
    let cart = System::Cartesian(field.to_polynomial());
    let opts = ScanOptions { h_min: 0.01, h_max: 0.4, grid: 48, ..Default::default() };
    let a = find_cycles(&polar, &opts).unwrap();
    let b = find_cycles(&cart, &ScanOptions { h_min: polar.section_x(0.01), h_max: polar.section_x(0.4), ..opts }).unwrap();
    assert_eq!(b.count(), a.count(), "{:?}", b.warnings);
    for (p, c) in a.cycles.iter().zip(&b.cycles) {
        assert!((p.section_x - c.h_star).abs() < 1e-3 * p.section_x, "{} vs {}", p.section_x, c.h_star);
    }
}

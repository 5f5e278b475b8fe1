use stein_density_core::conditional::{collect, default_bins, estimate_theta};
use stein_density_core::decomposition::{Component, Decomposition, Statistic};
use stein_density_core::density::{
    check_existence, l1_distance, phi_and_theta_from_density, reconstruct_with_floor, DensityEstimate, Verdict,
};
use stein_density_core::distributions::Distribution;
use stein_density_core::expressions::parse;
use stein_density_core::reference::{chi_square_pdf, irwin_hall_pdf};
use stein_density_core::stein::SteinKernel;

fn explicit(stat: &Statistic, hs: &[&str]) -> Decomposition {
    let n = stat.dimension();
    let comps = hs
        .iter()
        .enumerate()
        .map(|(k, h)| Component {
            expr: parse(h, n).unwrap(),
            active: k,
        })
        .collect();
    Decomposition::explicit(comps, n).unwrap()
}

fn median_theta(est: &stein_density_core::conditional::ConditionalEstimate) -> f64 {
    let mut m = est.bin_means.clone();
    m.sort_by(f64::total_cmp);
    m[m.len() / 2]
}

#[test]
fn uniform_sum_end_to_end() {
    let n = 2;
    let stat = Statistic::new(parse("x1 + x2", n).unwrap(), vec![Distribution::uniform(0.0, 1.0).unwrap(); n], 1).unwrap();
    let dec = explicit(&stat, &["x1 - 0.5", "x2 - 0.5"]);
    let kernel = SteinKernel::new(&stat, &dec).unwrap();
    let batch = collect(&kernel, 200_000, 5).unwrap();
    let est = estimate_theta(&batch, default_bins(batch.len())).unwrap();
    assert_eq!(check_existence(&est).verdict, Verdict::Supported);
    let p = reconstruct_with_floor(|t| est.evaluate(t).0, batch.central_range(0.005), 512, Some(median_theta(&est)))
        .unwrap()
        .with_shift(stat.mean());
    let l1 = l1_distance(&p, |t| irwin_hall_pdf(2, t + 1.0).unwrap());
    assert!(l1 < 0.05, "{l1}");
}

#[test]
fn chi_square_two_end_to_end() {
    let stat = Statistic::new(parse("x1^2 + x2^2", 2).unwrap(), vec![Distribution::curie_weiss(1, 1.0).unwrap(); 2], 1).unwrap();
    let dec = explicit(&stat, &["x1^2 - 1", "x2^2 - 1"]);
    let kernel = SteinKernel::new(&stat, &dec).unwrap();
    let batch = collect(&kernel, 100_000, 6).unwrap();
    let est = estimate_theta(&batch, default_bins(batch.len())).unwrap();
    // theta(t) = 2 (t + 2) exactly for this sum.
    for k in est.central_bins(0.9) {
        let exact = 2.0 * (est.bin_centers[k] + 2.0);
        assert!((est.raw_means[k] - exact).abs() < 1e-6 * exact.max(1.0), "{k}");
    }
    let p = reconstruct_with_floor(|t| est.evaluate(t).0, batch.central_range(0.005), 512, Some(median_theta(&est)))
        .unwrap()
        .with_shift(2.0);
    let l1 = l1_distance(&p, |t| chi_square_pdf(2.0, t + 2.0));
    assert!(l1 < 0.05, "{l1}");
}

#[test]
fn histogram_density_matches_reconstruction() {
    let n = 3;
    let stat = Statistic::new(parse("x1 + x2 + x3", n).unwrap(), vec![Distribution::uniform(0.0, 1.0).unwrap(); n], 1).unwrap();
    let dec = explicit(&stat, &["x1 - 0.5", "x2 - 0.5", "x3 - 0.5"]);
    let kernel = SteinKernel::new(&stat, &dec).unwrap();
    let batch = collect(&kernel, 1_000_000, 7).unwrap();
    let est = estimate_theta(&batch, default_bins(batch.len())).unwrap();
    let p = reconstruct_with_floor(|t| est.evaluate(t).0, batch.central_range(0.005), 512, Some(median_theta(&est))).unwrap();
    let hist = DensityEstimate::frequency_polygon(&batch.t_values, 200).unwrap();
    let l1 = l1_distance(&p, |t| hist.pdf(t - hist.center_shift));
    assert!(l1 < 0.05, "{l1}");
}

/// theta from conditional regression against phi / p of a histogram of the
/// same statistic, on the central 90% of mass.
#[test]
fn regression_theta_matches_phi_over_histogram_density() {
    let alphas = [1.0, 1.0, 2.0];
    let stat = Statistic::new(
        parse("x1^2 + x2^2 + 2*x3^2", 3).unwrap(),
        vec![Distribution::curie_weiss(1, 1.0).unwrap(); 3],
        1,
    )
    .unwrap();
    let hs: Vec<String> = alphas.iter().enumerate().map(|(k, a)| format!("{a}*(x{}^2 - 1)", k + 1)).collect();
    let hs: Vec<&str> = hs.iter().map(String::as_str).collect();
    let dec = explicit(&stat, &hs);
    let kernel = SteinKernel::new(&stat, &dec).unwrap();
    let batch = collect(&kernel, 1_000_000, 8).unwrap();
    let est = estimate_theta(&batch, 100).unwrap();
    let hist = DensityEstimate::frequency_polygon(&batch.t_values, 400).unwrap();
    let inv = phi_and_theta_from_density(&hist).unwrap();
    let shift = hist.center_shift;
    let width = hist.grid[2] - hist.grid[1];
    let mut checked = 0;
    for k in est.central_bins(0.9) {
        let t = est.bin_centers[k];
        let g = t - shift;
        let j = inv.grid.partition_point(|&v| v < g);
        let (Some(a), Some(b)) = (inv.theta[j - 1], inv.theta[j]) else { continue };
        let th = a + (b - a) * (g - inv.grid[j - 1]) / (inv.grid[j] - inv.grid[j - 1]);
        // The histogram side is dominated by the density noise 1/sqrt(count);
        // phi averages many bins and is far tighter.
        let count = hist.pdf(g) * width * batch.len() as f64;
        let hist_se = th / count.sqrt();
        let se = est.bin_se[k];
        let combined = (se * se + hist_se * hist_se).sqrt();
        let reg = est.raw_means[k];
        assert!((reg - th).abs() < 3.0 * combined, "t = {t}: {reg} vs {th} (se {combined})");
        checked += 1;
    }
    assert!(checked > 80, "{checked}");
}

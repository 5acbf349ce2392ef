use std::io::Write;
use std::time::Instant;

use approx::assert_relative_eq;
use birefringent_cavity::characterization::*;
use birefringent_cavity::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SPLITTING: f64 = 3.471;
const FWHM: f64 = 3.543;

fn truth() -> DoubleLorentzian {
    let mut m = DoubleLorentzian::symmetric(SPLITTING, FWHM, 1.0);
    m.baseline = 0.02;
    m.amplitudes = [1.0, 0.8];
    m
}

fn clean_scan() -> TransmissionScan {
    TransmissionScan::synthesize(&truth(), -15.0, 15.0, 401).unwrap()
}

#[test]
fn noiseless_scan_is_recovered() {
    let fit = fit_transmission(&clean_scan(), None, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    assert_relative_eq!(fit.splitting, SPLITTING, max_relative = 1e-3);
    assert_relative_eq!(fit.fwhm, FWHM, max_relative = 1e-3);
    assert_relative_eq!(fit.centers[0], -SPLITTING / 2.0, epsilon = 1e-3 * SPLITTING);
    assert_relative_eq!(fit.amplitudes[0], 1.0, max_relative = 1e-3);
    assert_relative_eq!(fit.amplitudes[1], 0.8, max_relative = 1e-3);
    assert_relative_eq!(fit.baseline, 0.02, epsilon = 1e-6);
    // much tighter than required
    assert!((fit.splitting - SPLITTING).abs() < 1e-7);
}

#[test]
fn independent_widths_recover_unequal_peaks() {
    let mut m = truth();
    m.fwhms = [3.2, 3.9];
    let scan = TransmissionScan::synthesize(&m, -15.0, 15.0, 401).unwrap();
    let opts = FitOptions {
        independent_widths: true,
        ..FitOptions::default()
    };
    let fit = fit_transmission(&scan, None, &opts).unwrap();
    assert_relative_eq!(fit.fwhms[0], 3.2, max_relative = 1e-6);
    assert_relative_eq!(fit.fwhms[1], 3.9, max_relative = 1e-6);
    assert_relative_eq!(fit.splitting, SPLITTING, max_relative = 1e-6);
}

#[test]
fn two_percent_noise_keeps_the_median_splitting_within_one_percent() {
    let start = Instant::now();
    let clean = clean_scan();
    let normal = Normal::new(0.0, 0.02).unwrap();
    let mut splittings: Vec<f64> = (0..100u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy = clean.map_signal(|_, v| v + normal.sample(&mut rng)).unwrap();
            fit_transmission(&noisy, None, &FitOptions::default()).unwrap().splitting
        })
        .collect();
    splittings.sort_by(f64::total_cmp);
    let median = 0.5 * (splittings[49] + splittings[50]);
    assert!((median / SPLITTING - 1.0).abs() < 0.01, "median {median}");
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn fit_is_invariant_under_signal_scaling_and_detuning_shift() {
    let base = fit_transmission(&clean_scan(), None, &FitOptions::default()).unwrap();
    let scaled = clean_scan().map_signal(|_, v| 250.0 * v).unwrap();
    let fit = fit_transmission(&scaled, None, &FitOptions::default()).unwrap();
    assert_relative_eq!(fit.splitting, base.splitting, max_relative = 1e-8);
    assert_relative_eq!(fit.amplitudes[0], 250.0 * base.amplitudes[0], max_relative = 1e-8);
    let mut m = truth();
    m.centers = [m.centers[0] + 40.0, m.centers[1] + 40.0];
    let shifted = TransmissionScan::synthesize(&m, 25.0, 55.0, 401).unwrap();
    let fit = fit_transmission(&shifted, None, &FitOptions::default()).unwrap();
    assert_relative_eq!(fit.splitting, base.splitting, max_relative = 1e-7);
    assert_relative_eq!(fit.centers[0], base.centers[0] + 40.0, epsilon = 1e-7);
}

#[test]
fn cost_never_increases() {
    let normal = Normal::new(0.0, 0.02).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noisy = clean_scan().map_signal(|_, v| v + normal.sample(&mut rng)).unwrap();
    let fit = fit_transmission(&noisy, None, &FitOptions::default()).unwrap();
    assert!(fit.cost_history.len() >= 2);
    assert!(fit.cost_history.windows(2).all(|w| w[1] <= w[0]));
    assert!(fit.splitting_error() > 0.0 && fit.splitting_error() < 0.1);
}

#[test]
fn flat_scan_is_degenerate() {
    let scan = TransmissionScan::new((0..50).map(f64::from).collect(), vec![1.0; 50]).unwrap();
    assert!(fit_transmission(&scan, None, &FitOptions::default()).is_err());
}

#[test]
fn ingest_reports_bad_rows_and_fits_the_rest() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "detuning_mhz,transmission").unwrap();
    for (i, (x, y)) in clean_scan().detuning().iter().zip(clean_scan().signal()).enumerate().rev() {
        match i {
            10 => writeln!(file, "{x},NaN").unwrap(),
            20 => writeln!(file, "{x},-0.5").unwrap(),
            _ => writeln!(file, "{x},{y}").unwrap(),
        }
    }
    file.flush().unwrap();
    let ingested = ingest_scan_file(file.path()).unwrap();
    assert_eq!(ingested.rejected.len(), 2);
    assert_eq!(ingested.scan.len(), 399);
    assert_eq!(ingested.warnings.len(), 1);
    let lines: Vec<usize> = ingested.rejected.iter().map(|d| d.line).collect();
    assert_eq!(lines, vec![2 + (400 - 20), 2 + (400 - 10)]);
    let fit = fit_transmission(&ingested.scan, None, &FitOptions::default()).unwrap();
    assert_relative_eq!(fit.splitting, SPLITTING, max_relative = 1e-6);
}

#[test]
fn ingest_rejects_bad_headers_and_duplicates() {
    let err = ingest_scan("freq,signal\n1,2\n".as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }));
    let err = ingest_scan("detuning_mhz,transmission\n1,2\n1,3\n".as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }));
    let err = ingest_scan("detuning_mhz,transmission\n1,abc\n".as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }));
    assert!(matches!(
        ingest_scan("detuning_mhz,transmission\n".as_bytes()).unwrap_err(),
        Error::EmptyScan
    ));
}

#[test]
fn report_and_csv_row_agree() {
    let fit = fit_transmission(&clean_scan(), None, &FitOptions::default()).unwrap();
    let row = fit.csv_row();
    assert_eq!(
        row.split(',').count(),
        DoubleLorentzianFit::CSV_HEADER.split(',').count()
    );
    assert!(fit.report().contains("splitting_mhz = 3.471000"));
}

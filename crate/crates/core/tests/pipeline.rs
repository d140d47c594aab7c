use std::path::Path;

use fimlfm::config::{parse_config, FrameSource, RunConfig};
use fimlfm::echo::{simulate_echo, PointTarget};
use fimlfm::imaging::focus_rda;
use fimlfm::quality::{report_target, ExtractOptions, TargetReport};
use num_complex::Complex64;

fn shipped(name: &str) -> RunConfig {
    parse_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)).unwrap()
}

fn focus_center_target(cfg: &RunConfig) -> TargetReport {
    let wf = cfg.waveform().unwrap();
    let target = PointTarget::relative("C", &cfg.geometry, 0.0, 0.0, Complex64::new(1.0, 0.0));
    let frame = cfg.frame(&wf, cfg.acquisition.pulses).unwrap();
    let cube = simulate_echo(&wf, &cfg.geometry, &cfg.acquisition, &frame, std::slice::from_ref(&target)).unwrap();
    let img = focus_rda(&cube, &wf, &cfg.geometry, cfg.pipeline).unwrap();
    report_target(&img, &target, &cfg.geometry, &ExtractOptions::default()).unwrap()
}

#[test]
fn shipped_configs_parse() {
    let fim = shipped("hap_default.cfg");
    let lfm = shipped("hap_lfm.cfg");
    assert_eq!(fim.waveform.subpulses, 4);
    assert_eq!(lfm.waveform.subpulses, 1);
    assert_eq!(fim.scene.targets.len(), 5);
}

#[test]
fn contiguous_fim_focuses_like_a_sinc_and_like_lfm() {
    let mut fim = shipped("hap_default.cfg");
    fim.frame = FrameSource::Pattern(vec![0, 1, 2, 3]);
    let fim = focus_center_target(&fim);
    let lfm = focus_center_target(&shipped("hap_lfm.cfg"));

    for r in [&fim, &lfm] {
        for pslr in [r.range_pslr_db, r.azimuth_pslr_db] {
            assert!((pslr + 13.26).abs() < 1.0, "{r:?}");
        }
        for islr in [r.range_islr_db, r.azimuth_islr_db] {
            assert!((islr + 9.9).abs() < 1.0, "{r:?}");
        }
        // Unweighted sinc: -3 dB width is 0.886 of the nominal c / 2B.
        assert!((r.range_resolution_m / (0.886 * 1.875) - 1.0).abs() < 0.02, "{r:?}");
    }
    // Same synthesized band, same aperture.
    assert!((fim.range_resolution_m / lfm.range_resolution_m - 1.0).abs() < 0.02);
    assert!((fim.azimuth_resolution_m / lfm.azimuth_resolution_m - 1.0).abs() < 0.02);
}

#[test]
fn focused_peak_lands_on_the_target() {
    let cfg = shipped("hap_default.cfg");
    let wf = cfg.waveform().unwrap();
    let frame = cfg.frame(&wf, cfg.acquisition.pulses).unwrap();
    let cube = simulate_echo(&wf, &cfg.geometry, &cfg.acquisition, &frame, &cfg.scene.targets).unwrap();
    let img = focus_rda(&cube, &wf, &cfg.geometry, cfg.pipeline).unwrap();
    for t in &cfg.scene.targets {
        let r = report_target(&img, t, &cfg.geometry, &ExtractOptions::default()).unwrap();
        // Within a quarter of a resolution cell in both directions.
        assert!((r.peak.range_m - t.closest_range(&cfg.geometry)).abs() < 0.4, "{r:?}");
        assert!((r.peak.azimuth_m - t.azimuth_m).abs() < 0.75, "{r:?}");
    }
}

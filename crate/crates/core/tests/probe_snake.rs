// temporary probe
use ces_core::config::{Algorithm, FingerprintMode, RunConfig};
use ces_core::runner::EsDriver;

#[test]
#[ignore]
fn probe_snake() {
    let mut c = RunConfig::defaults_for_env("snake");
    c.algorithm = Algorithm::CuriosityEs;
    c.m_per_individual = 25;
    c.capacity = 1400;
    c.generations = 10;
    c.fingerprint_mode = FingerprintMode::None;
    c.seed = 0;
    let mut driver = EsDriver::new(c).unwrap();
    let mut hit = false;
    for g in 0..10 {
        let r = driver.step().unwrap();
        if g % 10 == 0 || (!hit && r.best_so_far > 0.0) {
            if r.best_so_far > 0.0 { hit = true; }
            println!(
                "gen {g}: max_fe {:.3} best {:.3} cov {:.2}% fi_mean {:.2} loss {:.4} {} ms",
                r.max_fe, r.best_so_far, r.coverage_percent, r.mean_fi, r.icm_mean_loss, r.wall_ms
            );
        }
    }
}

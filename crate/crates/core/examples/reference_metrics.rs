//! Traces the built-in reference scene and prints its headline metrics.

use catafinger::config::SceneConfig;
use catafinger::metrics::DesignMetrics;

fn main() {
    let scene = SceneConfig::reference().build().expect("reference scene builds");
    let start = std::time::Instant::now();
    let traces = scene.trace_all().expect("trace");
    let m = DesignMetrics::compute(&traces, scene.skin(), 1.0);
    let (bottom, tip) = m.end_resolutions(0.1).expect("hits at both ends");
    let argmin = m
        .imaging_angle_profile
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .map(|p| p.arc_mm / m.skin_length)
        .unwrap_or(f64::NAN);
    println!("traced {} pixels in {:?}", traces.len(), start.elapsed());
    println!("coverage          {:.4}", m.coverage);
    println!("skin hits         {}/{}", m.skin_hits, traces.len());
    println!("min angle (deg)   {:.3} at arc fraction {:.3}", m.min_imaging_angle, argmin);
    println!("bottom/tip px/mm  {:.4} / {:.4} = {:.4}", bottom, tip, bottom / tip);
}

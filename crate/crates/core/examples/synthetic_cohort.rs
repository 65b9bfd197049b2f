//! Generates a small synthetic cohort from a TOML config, writes it to disk
//! and summarizes what was drawn.

use fundus_eval::report::write_cohort;
use fundus_eval::synth::{generate_ground_truth, SynthConfig};

const CONFIG: &str = r#"
n_images = 40
width = 192
height = 160
prevalence = 0.25
disc_semi_v = [20.0, 30.0]
seed = 42

[[teams]]
name = "exact"

[[teams]]
name = "sloppy"
separation = 1.0
noise = { center = 2.0, axes = 2.0, tilt = 0.05 }
"#;

fn main() -> anyhow::Result<()> {
    let cfg = SynthConfig::from_toml(CONFIG)?;
    let cohort = generate_ground_truth(&cfg)?;
    println!("{} images, {} glaucoma", cohort.len(), cohort.positives());
    for img in cohort.images.iter().take(5) {
        println!(
            "{} {:?} vCDR {:.3} disc at ({:.1}, {:.1}) semi-axes {:.1}x{:.1}",
            img.image_id, img.label, img.vcdr, img.disc.cx, img.disc.cy, img.disc.semi_h, img.disc.semi_v
        );
    }

    let dir = tempfile::tempdir()?;
    write_cohort(&cohort, dir.path())?;
    let mut entries: Vec<String> = std::fs::read_dir(dir.path())?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    println!("written: {}", entries.join(", "));
    Ok(())
}

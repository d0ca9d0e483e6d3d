//! Segregation on a 7x7x7 grid, viewed from two sides.
//!
//! ```text
//! cargo run -p abm --example schelling3d -- [min_alike]
//! ```

use std::collections::BTreeMap;

use abm::datacollect::get_nums_agents;
use abm::gallery::like_neighbor_fraction;
use abm::render::write_frames;
use abm::rundir::run_gallery;
use abm::{EntityView, Projection, PropValue, ViewOpts};

fn main() -> abm::Result<()> {
    let min_alike: i64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let overrides = BTreeMap::from([("min_alike".to_string(), PropValue::Int(min_alike))]);
    let (manifest, model) = run_gallery("schelling3d", &overrides, 1, 200)?;

    let happy = |v: &EntityView<'_>| Ok(v.label("mood")? == "happy");
    let counts = get_nums_agents(&model, &[&happy], &["happy"])?;
    let happy = counts.f64_column("happy").unwrap_or_default();
    for t in [0u64, 1, 10, 50, 100, 200] {
        println!(
            "tick {t:3}  happy {:3}  like-neighbour fraction {:.3}",
            happy[t as usize],
            like_neighbor_fraction(&model, t)?
        );
    }

    let out = std::env::temp_dir().join("schelling3d");
    for (name, projection) in [("xy", Projection::Xy), ("xz", Projection::Xz)] {
        let view = ViewOpts {
            projection,
            canvas: 300,
            ..ViewOpts::default()
        };
        let files = write_frames(&model, &manifest.space, &out.join(name), &view)?;
        println!("{} {name} frames in {}", files.len(), out.join(name).display());
    }
    Ok(())
}

//! Load the spot catalog and choose three places to introduce, with and
//! without a spot the user asked for.
//!
//! ```bash
//! cargo run --example pick_spots
//! ```

use std::collections::HashSet;
use std::path::Path;

use tourbot::spotdb::{haversine_km, select_introduction_spots, GenreMap, SpotCatalog, Theme};

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/catalog");
    let genres = GenreMap::parse(&std::fs::read_to_string(dir.join("genres.tsv"))?)?;
    let catalog = SpotCatalog::load(&std::fs::read_to_string(dir.join("kyoto_spots.csv"))?, &genres)?;
    println!("{} spots loaded", catalog.len());

    let visited: HashSet<String> = ["kinkakuji".to_string()].into();
    for (theme, desired) in [(Theme::History, None), (Theme::History, Some("nijo_castle")), (Theme::Nature, None)] {
        let chosen = select_introduction_spots(&catalog, theme, &visited, desired, 3)?;
        println!("{theme} (desired: {}):", desired.unwrap_or("-"));
        let seed = chosen[0].location();
        for spot in chosen {
            println!("  {:<28} {:>5.2} km from the first pick", spot.name, haversine_km(seed, spot.location()));
        }
    }
    Ok(())
}

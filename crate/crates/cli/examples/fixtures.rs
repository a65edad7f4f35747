//! Writes the sample inputs under `data/`: `cargo run --example fixtures -- data`.

use std::fs;
use std::path::PathBuf;

use approxenum::neighbourhood::TypeRegistry;
use approxenum::workloads::{figure1, k2_family};
use approxenum::Schema;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    fs::create_dir_all(&dir)?;
    let reg = TypeRegistry::new();
    fs::write(dir.join("graph.schema"), Schema::graph().to_text())?;
    fs::write(dir.join("n1.db"), figure1::n1().to_text())?;
    fs::write(dir.join("n2.db"), figure1::n2().to_text())?;
    fs::write(dir.join("n3.db"), figure1::n3().to_text())?;
    fs::write(dir.join("planted_20_20.db"), figure1::planted(20, 20).to_text())?;
    fs::write(dir.join("g_1_1.db"), figure1::planted(1, 1).to_text())?;
    fs::write(dir.join("tau1.query"), figure1::tau1_query(&reg).to_text())?;
    fs::write(dir.join("example.query"), figure1::example_query(&reg).to_text())?;
    let fam = k2_family(240, 1);
    fs::write(dir.join("pairs_240.db"), fam.db.to_text())?;
    fs::write(dir.join("pairs.query"), fam.pair_query(&reg, false).to_text())?;
    Ok(())
}

//! Export a system to DOT, CSV, SVG, and round-trip it through JSON.

use diamondlim::io::{
    export_csv_constants, export_csv_edges, export_dot, export_svg, read_system, write_json,
    SystemFile,
};
use diamondlim::laakso::build_laakso;

fn main() {
    let sys = build_laakso(2).unwrap();
    let dir = std::env::temp_dir().join("diamondlim-exports");
    std::fs::create_dir_all(&dir).unwrap();

    let dot = export_dot(&sys.levels[1]);
    std::fs::write(dir.join("level1.dot"), &dot).unwrap();
    println!("DOT (level 1):\n{dot}");

    let consts = export_csv_constants(&sys);
    std::fs::write(dir.join("constants.csv"), &consts).unwrap();
    println!("constants table:\n{consts}");
    std::fs::write(dir.join("edges1.csv"), export_csv_edges(&sys.levels[1])).unwrap();

    let svg = export_svg(&sys, 2, 2000).unwrap();
    std::fs::write(dir.join("level2.svg"), &svg).unwrap();
    println!("SVG: {} bytes for level 2", svg.len());

    // JSON round trip is bit-exact on re-serialization.
    let path = dir.join("system.json");
    write_json(&path, &SystemFile::Inverse(sys.clone())).unwrap();
    let back = read_system(&path).unwrap();
    let SystemFile::Inverse(restored) = back else { panic!("wrong kind") };
    assert_eq!(
        serde_json::to_string(&restored).unwrap(),
        serde_json::to_string(&sys).unwrap()
    );
    println!("JSON round trip exact; artifacts in {}", dir.display());
}

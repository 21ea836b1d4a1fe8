#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use schwarz_box::decomposition::{owner_from_entries, parse_partition_file, Decomposition};
use schwarz_box::problems::Problem;

fn problem() -> &'static Problem {
    static P: OnceLock<Problem> = OnceLock::new();
    P.get_or_init(|| Problem::ignition(4).unwrap())
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(entries) = parse_partition_file(text) else { return };
    let space = problem().space();
    if let Ok(owner) = owner_from_entries(&entries, space) {
        let d = Decomposition::from_owner(owner, &space.dof_adjacency(), 1).unwrap();
        assert_eq!(d.owner().len(), space.num_free());
    }
});

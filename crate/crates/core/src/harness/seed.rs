//! Counter-based seed derivation. Every stochastic choice in a run takes its
//! seed from `derive_seed(root, domain, a, b)`, so adding a client or a round
//! never shifts anyone else's stream.

/// What a derived seed is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedDomain {
    Planting = 1,
    Data = 2,
    Partition = 3,
    /// Per client: local split and training order.
    Client = 4,
    /// Shared initial parameters.
    Init = 5,
    /// Per client: replacement shard in heterogeneous scenarios.
    Hetero = 6,
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, domain: SeedDomain, a: u64, b: u64) -> u64 {
    let d = splitmix64(root ^ splitmix64(domain as u64));
    splitmix64(splitmix64(d ^ a) ^ b.rotate_left(32))
}

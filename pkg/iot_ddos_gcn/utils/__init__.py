from .seeding import derive_rng, derive_seed_sequence

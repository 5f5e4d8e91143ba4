"""Shared primitives: config defaults, contracts, errors, results, seeded RNG."""

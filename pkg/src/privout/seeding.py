"""Deterministic sub-seed derivation for multi-stage experiments."""

import hashlib


def derive_seed(master_seed, *labels):
    """Hash a master seed with stage labels into an independent RNG seed."""
    text = ":".join([str(int(master_seed)), *(str(label) for label in labels)])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % (2**63)

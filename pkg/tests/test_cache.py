from fractions import Fraction

import numpy as np

from lpflux.cache import BlockCache, spec_hash
from lpflux.construction import FieldSpec, mode_block


def test_store_load_round_trip(tmp_path):
    spec = FieldSpec(eps="1/8", eps0="1/8", q_min=4, q_max=5)
    cache = BlockCache(tmp_path)
    assert cache.warm(spec, 4) == {1: "miss", 2: "miss", 3: "miss"}
    again = BlockCache(tmp_path)
    assert again.warm(spec, 4) == {1: "hit", 2: "hit", 3: "hit"}
    b = again.load(spec, 4, 3)
    ref = mode_block(Fraction(1, 8), 4, 3)
    for name in ("xi", "P", "Q", "den"):
        np.testing.assert_array_equal(getattr(b, name), getattr(ref, name))
    np.testing.assert_array_equal(b.dirs, ref.dirs)


def test_corrupt_entry_is_rebuilt(tmp_path):
    spec = FieldSpec(eps="1/8", eps0="1/8", q_min=4, q_max=4)
    cache = BlockCache(tmp_path)
    cache.warm(spec, 4)
    for p in tmp_path.glob("*.npz"):
        p.write_bytes(b"garbage")
    fresh = BlockCache(tmp_path)
    assert fresh.warm(spec, 4) == {1: "miss", 2: "miss", 3: "miss"}
    assert BlockCache(tmp_path).warm(spec, 4) == {1: "hit", 2: "hit", 3: "hit"}


def test_negative_control_keys_are_separate(tmp_path):
    spec = FieldSpec(eps="1/8", eps0="1/8", q_min=4, q_max=4)
    BlockCache(tmp_path).warm(spec, 4)
    ctrl = spec.with_(negative_control="no-leray")
    assert BlockCache(tmp_path).warm(ctrl, 4)[1] == "miss"


def test_spec_hash_stable_and_sensitive():
    a = FieldSpec(eps="1/16", q_max=9)
    assert spec_hash(a) == spec_hash(FieldSpec(eps=Fraction(1, 16), q_max=9))
    assert spec_hash(a) != spec_hash(a.with_(q_max=10))

import hashlib
import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiernav.semantic import (SEMANTIC, VISUAL, Instruction, QueryEmbedding, SemanticField, combined_similarity,
                              cosine, encode_instruction, field_query, label_embedding)
from hiernav.world import OBJECT_LABELS

# frozen regression constants (n=64, seed 42); recomputed by _reference_embedding
CHAIR_BED_COS = -0.1399168032710571
MEAN_ABS_COS_OBJECT_LABELS = 0.11064161370294463
# 5th percentile of cos(image query, clean label) over 1000 noisy draws was
# 0.9937; frozen one notch lower as the bound
IMAGE_COS_P5_BOUND = 0.99


def _reference_embedding(label, channel, n=64, seed=42):
    """Independent re-derivation: SHA-256 key -> Philox normals -> unit vector."""
    key = int.from_bytes(hashlib.sha256("\x1f".join(map(str, (seed, channel, label))).encode()).digest()[:16], "little")
    v = np.random.Generator(np.random.Philox(key=key)).standard_normal(n)
    return v / np.linalg.norm(v)


def test_label_embedding_deterministic():
    a = label_embedding("chair", VISUAL, 64, 42)
    b = label_embedding("chair", VISUAL, 64, 42)
    assert np.array_equal(a, b)
    assert cosine(a, b) == pytest.approx(1.0, abs=1e-12)


def test_label_embedding_matches_reference():
    for lab in OBJECT_LABELS:
        for ch in (VISUAL, SEMANTIC):
            np.testing.assert_allclose(label_embedding(lab, ch), _reference_embedding(lab, ch), atol=1e-15)


def test_frozen_label_separation():
    c = cosine(label_embedding("chair"), label_embedding("bed"))
    assert c == pytest.approx(CHAIR_BED_COS, abs=1e-12)
    assert abs(c) < 0.5
    pairs = [abs(cosine(label_embedding(a), label_embedding(b))) for a, b in itertools.combinations(OBJECT_LABELS, 2)]
    assert float(np.mean(pairs)) == pytest.approx(MEAN_ABS_COS_OBJECT_LABELS, abs=1e-12)
    assert np.mean(pairs) < 0.25


@settings(max_examples=50)
@given(label=st.text(min_size=1, max_size=12), n=st.integers(2, 256), seed=st.integers(0, 2**31))
def test_embedding_unit_norm(label, n, seed):
    v = label_embedding(label, SEMANTIC, n, seed)
    assert v.shape == (n,)
    assert abs(np.linalg.norm(v) - 1.0) < 1e-9


def test_empty_label_rejected():
    with pytest.raises(ValueError):
        label_embedding("")


def test_field_query_rules(fx3r):
    f = SemanticField.from_scenario(fx3r)
    fv, fs = field_query(f, (10.0, 2.0))
    assert np.array_equal(fv, label_embedding("chair", VISUAL))
    assert np.array_equal(fs, label_embedding("kitchen", SEMANTIC))
    fv, fs = field_query(f, (1.0, 2.0))
    assert np.array_equal(fv, label_embedding("living room", VISUAL))
    assert np.array_equal(fs, label_embedding("living room", SEMANTIC))
    fv, fs = field_query(f, (-5.0, -5.0))
    assert not fv.any() and not fs.any()
    q = encode_instruction(Instruction.text("chair", "kitchen"))
    assert combined_similarity(q, (fv, fs)) == 0.0


def test_query_many_matches_pointwise(fx3r):
    f = SemanticField.from_scenario(fx3r)
    pts = np.random.default_rng(0).uniform([-1, -1], [13, 5], size=(300, 2))
    fv, fs = f.query_many(pts)
    for p, a, b in zip(pts, fv, fs):
        qa, qb = f.query(p)
        assert np.array_equal(a, qa) and np.array_equal(b, qb)


def test_text_encoding(fx3r):
    q = encode_instruction(Instruction.text("chair", "kitchen"))
    assert np.array_equal(q.c, label_embedding("chair", VISUAL))
    assert np.array_equal(q.s, label_embedding("kitchen", SEMANTIC))
    q2 = encode_instruction(Instruction.text("chair"))
    assert np.array_equal(q2.s, label_embedding("chair", SEMANTIC))


def test_position_bypass():
    p = encode_instruction(Instruction.at(10, 2))
    assert p.tolist() == [10.0, 2.0]


def test_image_encoding_close_to_label(fx3r):
    f = SemanticField.from_scenario(fx3r)
    q = encode_instruction(Instruction.image("chair_1"), catalog=f.catalog)
    assert cosine(q.c, label_embedding("chair")) >= 0.9
    assert abs(np.linalg.norm(q.c) - 1) < 1e-9 and abs(np.linalg.norm(q.s) - 1) < 1e-9


def test_image_noise_percentile_bound():
    cat = {f"obj_{k}": ("chair", "kitchen") for k in range(1000)}
    ref = label_embedding("chair")
    cos = [cosine(encode_instruction(Instruction.image(k), catalog=cat).c, ref) for k in cat]
    assert np.percentile(cos, 5) >= IMAGE_COS_P5_BOUND


def test_image_unknown_object(fx3r):
    f = SemanticField.from_scenario(fx3r)
    with pytest.raises(KeyError):
        encode_instruction(Instruction.image("sofa_9"), catalog=f.catalog)


def test_combined_similarity_edges():
    a, b = label_embedding("chair"), label_embedding("kitchen", SEMANTIC)
    q = QueryEmbedding(a, b)
    assert combined_similarity(q, (a, b)) == pytest.approx(1.0)
    orth = np.zeros(64)
    orth[0], orth[1] = a[1], -a[0]
    assert combined_similarity(q, (orth, b), w_v=1.0) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        combined_similarity(q, (np.ones(32), b))
    with pytest.raises(ValueError):
        combined_similarity(q, (a, b), w_v=1.5)


@settings(max_examples=40)
@given(w=st.floats(0.0, 1.0), region=st.sampled_from(["kitchen", "hall", "bedroom"]))
def test_region_label_only_moves_semantic_term(w, region):
    f = (label_embedding("chair"), label_embedding("kitchen", SEMANTIC))
    q1 = encode_instruction(Instruction.text("chair", "kitchen"))
    q2 = encode_instruction(Instruction.text("chair", region))
    d = combined_similarity(q1, f, w) - combined_similarity(q2, f, w)
    expected = (1 - w) * (cosine(q1.s, f[1]) - cosine(q2.s, f[1]))
    assert d == pytest.approx(expected, abs=1e-12)


def test_instruction_payload_invariant():
    with pytest.raises(ValueError):
        Instruction("text", target_label="chair", embedding_seed="x").validate()
    with pytest.raises(ValueError):
        Instruction("image").validate()
    for i in (Instruction.text("a", "b"), Instruction.image("o"), Instruction.at(1, 2)):
        assert Instruction.from_dict(json.loads(json.dumps(i.to_dict()))) == i


def test_field_dump(fx3r):
    d = json.loads(SemanticField.from_scenario(fx3r).dump())
    assert d["n"] == 64 and d["seed"] == 42
    assert "chair" in d["labels"] and "kitchen" in d["labels"]

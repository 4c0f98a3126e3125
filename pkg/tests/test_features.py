import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crashgraph.errors import DomainError, EmbeddingError
from crashgraph.features import (
    EMBED_DIM,
    FINE_FEATURE_DIM,
    FileEmbeddingProvider,
    embed_hash,
    encode_hour,
    encode_weekday,
    fine_node_features,
    load_embeddings,
)

from conftest import make_record


class TestCyclicalEncodings:
    def test_hour_quarter_points(self):
        assert encode_hour(0) == pytest.approx((0.0, 1.0), abs=1e-9)
        assert encode_hour(6) == pytest.approx((1.0, 0.0), abs=1e-9)
        assert encode_hour(12) == pytest.approx((0.0, -1.0), abs=1e-9)

    def test_weekday_monday(self):
        assert encode_weekday(0) == pytest.approx((0.0, 1.0), abs=1e-9)

    def test_weekday_reflection_symmetry(self):
        s3, c3 = encode_weekday(3)
        s4, c4 = encode_weekday(4)
        assert c3 == pytest.approx(c4, abs=1e-12)
        assert s3 == pytest.approx(-s4, abs=1e-12)

    def test_weekday_six_matches_direct_trig(self):
        s, c = encode_weekday(6)
        assert s == pytest.approx(math.sin(12 * math.pi / 7), abs=1e-15)
        assert c == pytest.approx(math.cos(12 * math.pi / 7), abs=1e-15)

    @pytest.mark.parametrize("h", [-1, 24, 7.5, "3"])
    def test_hour_domain_errors(self, h):
        with pytest.raises(DomainError):
            encode_hour(h)

    @pytest.mark.parametrize("d", [-1, 7, 2.5])
    def test_weekday_domain_errors(self, d):
        with pytest.raises(DomainError):
            encode_weekday(d)

    @given(st.integers(min_value=0, max_value=23))
    def test_unit_circle_invariant(self, h):
        s, c = encode_hour(h)
        assert s * s + c * c == pytest.approx(1.0, abs=1e-9)

    def test_wraparound_continuity(self):
        def dist(a, b):
            return math.hypot(a[0] - b[0], a[1] - b[1])

        e0, e23, e12 = encode_hour(0), encode_hour(23), encode_hour(12)
        assert dist(e23, e0) < dist(e12, e0)
        # the angle at h=24 would coincide with h=0
        assert math.sin(2 * math.pi * 24 / 24) == pytest.approx(encode_hour(0)[0], abs=1e-12)


class TestHashEmbedding:
    def test_empty_text_is_zero_vector(self):
        v = embed_hash("")
        assert v.shape == (EMBED_DIM,)
        assert not v.any()

    def test_nonempty_text_is_unit_norm(self):
        for text in ("struck", "unit 1 failed to control speed", "a b c d e"):
            assert np.linalg.norm(embed_hash(text)) == pytest.approx(1.0, abs=1e-9)

    def test_repetition_removed_by_normalization(self):
        once = embed_hash("rear-end")
        twice = embed_hash("rear-end rear-end")
        np.testing.assert_allclose(twice, once, atol=1e-12)

    def test_case_and_punctuation_fold_into_tokens(self):
        assert np.array_equal(embed_hash("Struck!"), embed_hash("struck"))

    def test_pinned_hash_values(self):
        # Frozen against the fixed FNV-1a/seed constants; any change to the
        # hash breaks stored graphs, so this must never drift.
        v = embed_hash("unit 1 failed to control speed")
        nz = np.nonzero(v)[0].tolist()
        assert nz == [27, 51, 62, 165, 185, 341]
        assert v[27] == pytest.approx(-0.40824829046386307, abs=1e-15)
        assert v[165] == pytest.approx(0.40824829046386307, abs=1e-15)

    def test_signed_counts_cancel(self):
        # one positive-sign and one negative-sign token in the same bin would
        # cancel; verify the general signed accumulation via a two-token text
        v = embed_hash("struck speed")
        assert v[196] > 0 and v[27] < 0


class TestEmbeddingFile:
    def _write(self, tmp_path, rows):
        path = tmp_path / "emb.csv"
        header = "id," + ",".join(f"e{i}" for i in range(EMBED_DIM))
        path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
        return path

    def test_load_two_rows(self, tmp_path):
        rows = [f"a,{','.join(['0.5'] * EMBED_DIM)}", f"b,{','.join(['1e-3'] * EMBED_DIM)}"]
        table = load_embeddings(self._write(tmp_path, rows))
        assert set(table) == {"a", "b"}
        assert table["a"].shape == (EMBED_DIM,)
        assert table["b"][0] == pytest.approx(1e-3)

    def test_wrong_dimension_names_row(self, tmp_path):
        rows = [f"a,{','.join(['0.5'] * (EMBED_DIM - 1))}"]
        with pytest.raises(EmbeddingError, match="row 1"):
            load_embeddings(self._write(tmp_path, rows))

    def test_duplicate_id_rejected(self, tmp_path):
        row = f"a,{','.join(['0.5'] * EMBED_DIM)}"
        with pytest.raises(EmbeddingError, match="duplicate"):
            load_embeddings(self._write(tmp_path, [row, row]))

    def test_missing_id_lookup(self, tmp_path):
        rows = [f"a,{','.join(['0.5'] * EMBED_DIM)}"]
        provider = FileEmbeddingProvider(self._write(tmp_path, rows))
        with pytest.raises(EmbeddingError, match="zz"):
            provider.embed(make_record("zz"))

    def test_file_embeddings_not_renormalized(self, tmp_path):
        rows = [f"r1,{','.join(['2.0'] * EMBED_DIM)}"]
        provider = FileEmbeddingProvider(self._write(tmp_path, rows))
        vec = provider.embed(make_record(1))
        assert vec[0] == 2.0  # used verbatim


class TestFineFeatures:
    def test_length_is_389(self):
        rec = make_record(1, sae=3, narrative="struck")
        assert fine_node_features(rec, embed_hash(rec.narrative)).shape == (FINE_FEATURE_DIM,)
        assert FINE_FEATURE_DIM == 389

    def test_identity_composition(self):
        # 2024-01-01 00:00 UTC is a Monday; sae 0; zero embedding
        rec = make_record(1, ts=1704067200, sae=0, narrative="")
        out = fine_node_features(rec, np.zeros(EMBED_DIM))
        expected_head = [0.0, 0.0, 1.0, 0.0, 1.0]
        np.testing.assert_allclose(out[:5], expected_head, atol=1e-9)
        assert not out[5:].any()

    def test_layout_stable_under_narrative_change(self):
        a = make_record(1, sae=4, narrative="alpha")
        b = make_record(2, sae=4, narrative="omega different words")
        fa = fine_node_features(a, embed_hash(a.narrative))
        fb = fine_node_features(b, embed_hash(b.narrative))
        np.testing.assert_array_equal(fa[:5], fb[:5])

    def test_dimension_mismatch(self):
        with pytest.raises(EmbeddingError):
            fine_node_features(make_record(1), np.zeros(100))

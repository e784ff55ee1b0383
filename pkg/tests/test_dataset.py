import numpy as np
import pytest

from ltcrank.dataset import (
    CANONICAL_SIZE,
    PROXY_FIELDS,
    Normalization,
    canonical_checksum,
    invert_perplexity,
    load_canonical,
    normalize_proxies,
    parse_csv,
    write_csv,
)
from ltcrank.exceptions import CorpusError

from conftest import make_set

# the bundled corpus is the single source of truth; any edit must be deliberate
CANONICAL_SHA256 = "70ebc536c19b79fbe3719dae03528e32c7e48874839e2794fa18a4da0df63c8a"


class TestCanonical:
    def test_checksum_pinned(self):
        assert canonical_checksum() == CANONICAL_SHA256

    def test_size_and_ids(self, canonical):
        assert len(canonical) == CANONICAL_SIZE
        assert canonical.ids == tuple(range(1, 51))
        assert len(set(canonical.ids)) == 50

    def test_reference_record_values(self, canonical):
        first = canonical.record(1)
        assert first.sft.sft_cms == 69.800
        assert first.proxies.ppl_clm == 0.395
        assert first.proxies.kshot_rag == 34.990

    def test_corpus_max_cbqa_is_model_25(self, canonical):
        best = max(canonical.records, key=lambda r: r.sft.sft_cbqa)
        assert best.id == 25
        assert best.sft.sft_cbqa == 39.100

    def test_degenerate_and_duplicated_rows_kept(self, canonical):
        assert canonical.record(4).sft.sft_cbqa == 0.150
        for a, b in ((46, 49), (47, 50)):
            assert canonical.record(a).proxies == canonical.record(b).proxies
            assert canonical.record(a).sft == canonical.record(b).sft

    def test_kshot_rag_minimum_is_model_38(self, canonical):
        col = canonical.proxy_matrix[:, PROXY_FIELDS.index("kshot_rag")]
        assert canonical.ids[int(np.argmin(col))] == 38
        assert col.min() == 11.330


class TestParseCsv:
    def test_round_trip_serialization(self, canonical, tmp_path):
        path = tmp_path / "corpus.csv"
        write_csv(canonical, path)
        assert parse_csv(path) == canonical

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        write_csv(load_canonical(), path)
        lines = path.read_text().splitlines()
        row3 = lines[3].split(",")
        row3[0] = "2"  # collides with the row above
        lines[3] = ",".join(row3)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorpusError, match="duplicate id"):
            parse_csv(path)

    def test_negative_inverted_perplexity_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        write_csv(load_canonical(), path)
        lines = path.read_text().splitlines()
        row = lines[1].split(",")
        row[6] = "-0.1"  # ppl_clm
        lines[1] = ",".join(row)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorpusError, match="ppl_clm"):
            parse_csv(path)

    def test_non_numeric_field_names_row_and_column(self, tmp_path):
        path = tmp_path / "nan.csv"
        write_csv(load_canonical(), path)
        lines = path.read_text().splitlines()
        row = lines[5].split(",")
        row[11] = "abc"  # sft_cms of data row 5 (file row 6)
        lines[5] = ",".join(row)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorpusError, match="row 6.*sft_cms"):
            parse_csv(path)

    def test_header_mismatch_rejected(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("id,who,knows\n1,2,3\n")
        with pytest.raises(CorpusError, match="header"):
            parse_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            parse_csv(tmp_path / "nope.csv")


class TestInvertPerplexity:
    def test_identity_point(self):
        assert invert_perplexity(1.0) == 1.0

    def test_direct_formula(self):
        assert invert_perplexity(2.0) == 0.5

    def test_round_trip_of_stored_value(self):
        # model 1 stores 0.395; inverting its raw perplexity recovers it
        raw = 1.0 / 0.395
        assert invert_perplexity(raw) == pytest.approx(0.395, abs=1e-12)

    @pytest.mark.parametrize("bad", [0.0, -1.0, 0.5])
    def test_domain_errors(self, bad):
        with pytest.raises(ValueError):
            invert_perplexity(bad)

    def test_strictly_decreasing(self, rng):
        ppl = np.sort(rng.uniform(1.0, 50.0, size=64))
        inv = [invert_perplexity(v) for v in ppl]
        assert all(a > b for a, b in zip(inv, inv[1:]) if a != b)
        assert np.all(np.diff(inv) < 0)


class TestNormalization:
    def test_minmax_direct_formula(self):
        mset = make_set(
            [
                (1, (0.2,) * 5, (1.0, 2.0, 3.0)),
                (2, (0.4,) * 5, (2.0, 3.0, 4.0)),
                (3, (0.6,) * 5, (3.0, 4.0, 5.0)),
            ]
        )
        normed = normalize_proxies(mset, Normalization.MINMAX)
        col = normed.proxy_matrix[:, 0]
        assert col == pytest.approx([0.0, 0.5, 1.0], abs=1e-12)
        assert normed.normalization == Normalization.MINMAX

    def test_minmax_degenerate_column(self):
        mset = make_set(
            [
                (1, (1.0, 0.2, 5.0, 5.0, 5.0), (1.0, 2.0, 3.0)),
                (2, (1.0, 0.4, 6.0, 6.0, 6.0), (2.0, 3.0, 4.0)),
            ]
        )
        normed = normalize_proxies(mset, Normalization.MINMAX)
        assert normed.proxy_matrix[:, 0].tolist() == [0.5, 0.5]

    def test_minmax_canonical_kshot_rag_minimum(self, canonical):
        normed = normalize_proxies(canonical, Normalization.MINMAX)
        col = normed.proxy_matrix[:, PROXY_FIELDS.index("kshot_rag")]
        assert col[normed.position(38)] == 0.0
        assert col.max() == 1.0

    def test_zscore_moments(self, canonical):
        normed = normalize_proxies(canonical, Normalization.ZSCORE)
        matrix = normed.proxy_matrix
        assert np.allclose(matrix.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(matrix.std(axis=0), 1.0, atol=1e-12)

    def test_sft_columns_untouched(self, canonical):
        normed = normalize_proxies(canonical, Normalization.MINMAX)
        assert np.array_equal(normed.sft_matrix, canonical.sft_matrix)

    @pytest.mark.parametrize("scheme", [Normalization.MINMAX, Normalization.ZSCORE])
    def test_monotone_per_column(self, canonical, scheme):
        normed = normalize_proxies(canonical, scheme)
        raw, out = canonical.proxy_matrix, normed.proxy_matrix
        for k in range(raw.shape[1]):
            raw_sign = np.sign(raw[:, None, k] - raw[None, :, k])
            out_sign = np.sign(out[:, None, k] - out[None, :, k])
            assert np.array_equal(raw_sign, out_sign)


class TestModelSet:
    def test_at_least_two_records(self, canonical):
        with pytest.raises(CorpusError):
            make_set([(1, (0.5,) * 5, (1.0, 2.0, 3.0))])

    def test_unknown_id_lookup(self, canonical):
        with pytest.raises(KeyError, match="999"):
            canonical.record(999)

    def test_subset_preserves_order(self, canonical):
        sub = canonical.subset([10, 3, 7])
        assert sub.ids == (3, 7, 10)

"""Tests for cosine matching and threshold decisions."""
import csv
from pathlib import Path

import numpy as np
import pytest

from afr_match.errors import (
    BadThreshold,
    DimMismatch,
    EmptyGallery,
    MixedExtractors,
    PairError,
    ZeroVector,
)
from afr_match.features import EmbeddingVector
from afr_match.processing.matcher import (
    SimilarityScore,
    best_match,
    cosine,
    decide,
    magnitude,
    match_all,
    score_matrix,
)


def vec(ref, values, extractor_id="baseline-ghist-v1"):
    return EmbeddingVector(record_ref=ref, values=values, extractor_id=extractor_id)


def brute_force_cosine(a, b):
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    dot = sum(x * y for x, y in zip(a, b))
    norm_a = sum(x * x for x in a) ** 0.5
    norm_b = sum(y * y for y in b) ** 0.5
    return dot / (norm_a * norm_b)


class TestMagnitude:
    """Test magnitude."""

    def test_examples(self):
        """Test hand-evaluated norms."""
        assert magnitude([3, 4]) == 5.0
        assert magnitude([0, 0, 0]) == 0.0
        assert magnitude([1, 1, 1, 1]) == 2.0

    def test_embedding_vector(self):
        """Test EmbeddingVector inputs are accepted."""
        assert magnitude(vec("Real/1.png", [3, 4])) == pytest.approx(5.0)


class TestCosine:
    """Test cosine similarity."""

    def test_examples(self):
        """Test identical, orthogonal, opposite and 8/9 cases."""
        assert cosine([1, 2, 3], [1, 2, 3]).value == pytest.approx(1.0, abs=1e-6)
        assert cosine([1, 0], [0, 1]).value == 0.0
        assert cosine([1, 1], [-1, -1]).value == pytest.approx(-1.0, abs=1e-12)
        assert cosine([1, 2, 2], [2, 1, 2]).value == pytest.approx(8 / 9, abs=1e-9)

    def test_refs(self):
        """Test the score records both record refs."""
        score = cosine(vec("Real/6.png", [1, 0]), vec("Easy/18.png", [1, 1]))

        assert (score.real_ref, score.altered_ref) == ("Real/6.png", "Easy/18.png")

    def test_dim_mismatch(self):
        """Test vectors of different length raise DimMismatch."""
        with pytest.raises(DimMismatch):
            cosine([1, 2], [1, 2, 3])

    def test_zero_vector(self):
        """Test a zero vector raises ZeroVector."""
        with pytest.raises(ZeroVector):
            cosine([0, 0], [1, 2])

    def test_random_pairs_against_brute_force(self):
        """Test 1,000 random pairs agree with the direct formula and all invariants."""
        rng = np.random.default_rng(1234)
        for _ in range(1000):
            dim = int(rng.integers(2, 65))
            a = rng.standard_normal(dim)
            b = rng.standard_normal(dim)
            k = float(rng.uniform(0.01, 100.0))

            value = cosine(a, b).value

            assert abs(value - brute_force_cosine(a, b)) <= 1e-9
            assert -1.0 <= value <= 1.0
            assert cosine(b, a).value == value
            assert abs(cosine(k * a, b).value - value) <= 1e-6
            assert cosine(a, a).value == pytest.approx(1.0, abs=1e-6)


class TestDecide:
    """Test decide."""

    def test_published_sample_scores(self):
        """Test matched/not-matched verdicts for sample scores at 0.92."""
        assert decide(SimilarityScore("Real/6.png", "Easy/18.png", 0.9808), 0.92).matched is True
        assert decide(SimilarityScore("Real/6.png", "Easy/19.png", 0.8636), 0.92).matched is False

    def test_boundary_is_rejected(self):
        """Test a score equal to the threshold does not match."""
        assert decide(SimilarityScore("a", "b", 0.92), 0.92).matched is False

    def test_carries_label(self):
        """Test the genuine label is passed through."""
        decision = decide(SimilarityScore("a", "b", 0.5), 0.72, genuine=True)

        assert decision.genuine is True
        assert decision.threshold == 0.72

    @pytest.mark.parametrize("threshold", [0.0, 1.0, -0.2, 1.3])
    def test_bad_threshold(self, threshold):
        """Test thresholds outside (0, 1) raise BadThreshold."""
        with pytest.raises(BadThreshold):
            decide(SimilarityScore("a", "b", 0.5), threshold)

    def test_sample_decisions_fixture(self, fixtures_dir):
        """Test every sample row's verdict is reproduced from its score."""
        with open(Path(fixtures_dir) / "easy_sample_decisions.csv", newline="") as f:
            rows = list(csv.DictReader(f))

        assert len(rows) == 14
        for row in rows:
            score = SimilarityScore(row["real_ref"], row["altered_ref"], float(row["similarity"]))
            decision = decide(score, float(row["threshold"]))
            assert decision.matched == (row["verdict"] == "Matched")


class TestMatchAll:
    """Test match_all."""

    def setup_method(self):
        self.reals = [vec("Real/1.png", [1, 0]), vec("Real/2.png", [0, 1])]
        self.altereds = [vec("Easy/1.png", [1, 0.1]), vec("Easy/2.png", [0.2, 1]), vec("Easy/3.png", [1, 1])]

    def test_cardinality_and_order(self):
        """Test 2 x 3 inputs give 6 decisions in real-major order."""
        decisions = match_all(self.reals, self.altereds, 0.9)

        assert len(decisions) == 6
        assert [(d.score.real_ref, d.score.altered_ref) for d in decisions] == [
            ("Real/1.png", "Easy/1.png"), ("Real/1.png", "Easy/2.png"), ("Real/1.png", "Easy/3.png"),
            ("Real/2.png", "Easy/1.png"), ("Real/2.png", "Easy/2.png"), ("Real/2.png", "Easy/3.png"),
        ]

    def test_matches_brute_force(self):
        """Test every decision equals the per-pair formula and threshold rule."""
        decisions = match_all(self.reals, self.altereds, 0.72)

        for d in decisions:
            real = next(v for v in self.reals if v.record_ref == d.score.real_ref)
            altered = next(v for v in self.altereds if v.record_ref == d.score.altered_ref)
            expected = brute_force_cosine(real.values, altered.values)
            assert d.score.value == pytest.approx(expected, abs=1e-9)
            assert d.matched == (expected > 0.72)

    def test_ground_truth_labels(self):
        """Test labels are attached per pair."""
        truth = {(r.record_ref, a.record_ref): r.record_ref[-5] == a.record_ref[-5]
                 for r in self.reals for a in self.altereds}

        decisions = match_all(self.reals, self.altereds, 0.8, ground_truth=truth)

        assert all(d.genuine == truth[(d.score.real_ref, d.score.altered_ref)] for d in decisions)

    def test_reference_grid_size(self):
        """Test 40 reals x 90 altereds give 3600 decisions."""
        rng = np.random.default_rng(5)
        reals = [vec(f"Real/{i}.png", rng.random(8) + 0.01) for i in range(40)]
        altereds = [vec(f"Easy/{i}.png", rng.random(8) + 0.01) for i in range(90)]

        assert len(match_all(reals, altereds, 0.92)) == 3600

    def test_threshold_monotonicity(self):
        """Test matched counts never increase from 0.72 to 0.82 to 0.92 on random vectors."""
        rng = np.random.default_rng(500)
        vectors = [vec(f"Real/{i}.png", rng.random(16)) for i in range(500)]
        reals, altereds = vectors[:20], [vec(f"Easy/{i}.png", v.values) for i, v in enumerate(vectors[20:])]

        counts = []
        matched_sets = []
        for threshold in (0.72, 0.82, 0.92):
            decisions = match_all(reals, altereds, threshold)
            assert len(decisions) == 20 * 480
            matched = {(d.score.real_ref, d.score.altered_ref) for d in decisions if d.matched}
            counts.append(len(matched))
            matched_sets.append(matched)

        assert counts[0] >= counts[1] >= counts[2]
        assert matched_sets[2] <= matched_sets[1] <= matched_sets[0]

    def test_jobs_do_not_change_output(self):
        """Test threaded scoring returns the same decisions in the same order."""
        rng = np.random.default_rng(8)
        reals = [vec(f"Real/{i}.png", rng.standard_normal(12)) for i in range(7)]
        altereds = [vec(f"Hard/{i}.png", rng.standard_normal(12)) for i in range(5)]

        serial = match_all(reals, altereds, 0.5)
        threaded = match_all(reals, altereds, 0.5, jobs=3)

        assert [d.score.altered_ref for d in threaded] == [d.score.altered_ref for d in serial]
        assert [d.score.value for d in threaded] == pytest.approx([d.score.value for d in serial], abs=1e-12)

    def test_empty(self):
        """Test empty inputs raise EmptyGallery."""
        with pytest.raises(EmptyGallery):
            match_all([], self.altereds, 0.9)

    def test_mixed_extractors(self):
        """Test vectors from different extractors are refused."""
        with pytest.raises(MixedExtractors):
            match_all(self.reals, [vec("Easy/1.png", [1, 0], "vgg16-fc2")], 0.9)

    def test_zero_vector_names_pair(self):
        """Test a zero vector is reported with its record."""
        altereds = [vec("Easy/9.png", [0, 0])]

        with pytest.raises(PairError) as excinfo:
            match_all(self.reals, altereds, 0.9)

        assert excinfo.value.altered_ref == "Easy/9.png"

    def test_score_matrix_shape(self):
        """Test the score matrix is |reals| x |altereds| and bounded."""
        scores = score_matrix(self.reals, self.altereds)

        assert scores.shape == (2, 3)
        assert np.all(scores <= 1.0) and np.all(scores >= -1.0)


class TestBestMatch:
    """Test best_match."""

    def test_single_gallery(self):
        """Test a gallery of one returns that entry."""
        ref, score = best_match(vec("Easy/1.png", [1, 2]), [vec("Real/3.png", [2, 1])])

        assert ref == "Real/3.png"
        assert score.altered_ref == "Easy/1.png"

    def test_identical_vector(self):
        """Test an identical real wins with score 1."""
        gallery = [vec("Real/1.png", [0, 1]), vec("Real/2.png", [3, 4]), vec("Real/3.png", [1, 0])]

        ref, score = best_match(vec("Easy/5.png", [3, 4]), gallery)

        assert ref == "Real/2.png"
        assert score.value == pytest.approx(1.0)

    def test_tie_break(self):
        """Test ties go to the lexicographically smallest record_id."""
        gallery = [vec("Real/b.png", [1, 0]), vec("Real/a.png", [2, 0])]

        ref, _ = best_match(vec("Easy/1.png", [1, 0]), gallery)

        assert ref == "Real/a.png"

    def test_random_gallery(self):
        """Test the winner equals a brute-force argmax and survives rescaling the query."""
        rng = np.random.default_rng(77)
        for _ in range(50):
            gallery = [vec(f"Real/{i}.png", rng.standard_normal(6)) for i in range(5)]
            query = rng.standard_normal(6)
            expected = max(gallery, key=lambda g: brute_force_cosine(g.values, query)).record_ref

            assert best_match(vec("Easy/1.png", query), gallery)[0] == expected
            assert best_match(vec("Easy/1.png", query * 7.5), gallery)[0] == expected

    def test_empty_gallery(self):
        """Test an empty gallery raises EmptyGallery."""
        with pytest.raises(EmptyGallery):
            best_match(vec("Easy/1.png", [1, 0]), [])

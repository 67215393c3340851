import hashlib
import json

import pytest
import yaml

from hsnn.errors import ConfigError, InputInconsistency
from hsnn.pipeline import AnalysisConfig, run_pipeline
from hsnn.synth import SynthSpec, generate_synthetic

CORE_FILES = (
    "neighbors.tsv",
    "coverage.tsv",
    "positional.tsv",
    "strata.tsv",
    "treesim.tsv",
    "concentration.tsv",
)


def bundle_for(tmp_path, **kw):
    base = dict(
        clusters=4,
        tokens_per_cluster=6,
        dim=8,
        noise=0.0,
        planted_coverage=1.0,
        seed=11,
        occurrences_per_type=2,
        sentence_length=5,
        split_fraction=0.25,
    )
    base.update(kw)
    return generate_synthetic(tmp_path / "bundle", SynthSpec(**base))


def config_for(bundle, out_dir, **kw) -> AnalysisConfig:
    base = dict(
        vectors=str(bundle.vectors),
        tokens=str(bundle.tokens),
        out_dir=str(out_dir),
        embeddings=str(bundle.embeddings),
        vocab=str(bundle.vocab),
        parses=str(bundle.parses),
        lexicon=str(bundle.lexicon),
        n=5,
        min_freq=1,
        max_freq=10**6,
    )
    base.update(kw)
    return AnalysisConfig(**base)


def out_digests(out_dir, skip=("manifest.json",)):
    digests = {}
    for path in sorted(out_dir.iterdir()):
        if path.name in skip or not path.is_file():
            continue
        digests[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return digests


class TestRunPipeline:
    def test_full_bundle_emits_all_outputs(self, tmp_path):
        bundle = bundle_for(tmp_path)
        result = run_pipeline(config_for(bundle, tmp_path / "out"))
        for name in CORE_FILES:
            assert (tmp_path / "out" / name).is_file(), name
        assert (tmp_path / "out" / "report.txt").is_file()
        assert (tmp_path / "out" / "manifest.json").is_file()
        assert (tmp_path / "out" / "figure_acp_embedding.tsv").is_file()
        assert result.manifest["status"] == "ok"
        assert result.manifest["counts"]["queries"] > 0

    def test_without_parses_treesim_skipped(self, tmp_path):
        bundle = bundle_for(tmp_path)
        config = config_for(bundle, tmp_path / "out", parses=None)
        result = run_pipeline(config)
        assert not (tmp_path / "out" / "treesim.tsv").exists()
        assert result.manifest["stages"]["treesim"].startswith("skipped")
        assert result.treesim is None

    def test_without_lexicon_coverage_limited_to_embeddings(self, tmp_path):
        bundle = bundle_for(tmp_path)
        result = run_pipeline(config_for(bundle, tmp_path / "out", lexicon=None))
        assert result.lex_strata is None
        assert result.embed_strata is not None
        coverage = (tmp_path / "out" / "coverage.tsv").read_text()
        assert "LEXICON" not in coverage

    def test_reruns_byte_identical(self, tmp_path):
        bundle = bundle_for(tmp_path, noise=0.02)
        run_pipeline(config_for(bundle, tmp_path / "out1"))
        run_pipeline(config_for(bundle, tmp_path / "out2"))
        assert out_digests(tmp_path / "out1") == out_digests(tmp_path / "out2")

    def test_thread_counts_byte_identical(self, tmp_path):
        bundle = bundle_for(tmp_path, noise=0.02)
        run_pipeline(config_for(bundle, tmp_path / "out1", threads=1))
        run_pipeline(config_for(bundle, tmp_path / "out2", threads=3))
        assert out_digests(tmp_path / "out1") == out_digests(tmp_path / "out2")

    def test_zero_noise_identity_coverage(self, tmp_path):
        # pipeline-level identity: hidden states equal embeddings, one
        # occurrence per type, exclusion off -> every list matches N^E exactly
        bundle = bundle_for(tmp_path, occurrences_per_type=1, split_fraction=0.0, tokens_per_cluster=7)
        result = run_pipeline(config_for(bundle, tmp_path / "out", exclusion="self-only"))
        assert result.mean_embed_coverage == 1.0

    def test_manifest_written_on_failure(self, tmp_path):
        bundle = bundle_for(tmp_path)
        # vocab from a different bundle size -> embedding count mismatch
        other = generate_synthetic(
            tmp_path / "other",
            SynthSpec(clusters=2, tokens_per_cluster=2, dim=8, noise=0.0, planted_coverage=1.0, seed=1),
        )
        config = config_for(bundle, tmp_path / "out", vocab=str(other.vocab))
        with pytest.raises(InputInconsistency):
            run_pipeline(config)
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["status"] == "failed"
        assert "error" in manifest

    def test_parse_line_count_checked(self, tmp_path):
        bundle = bundle_for(tmp_path)
        truncated = tmp_path / "short_parses.txt"
        lines = bundle.parses.read_text().splitlines()
        truncated.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(InputInconsistency):
            run_pipeline(config_for(bundle, tmp_path / "out", parses=str(truncated)))

    def test_blank_parse_line_degrades_gracefully(self, tmp_path):
        bundle = bundle_for(tmp_path)
        patched = tmp_path / "patched_parses.txt"
        lines = bundle.parses.read_text().splitlines()
        lines[0] = ""
        patched.write_text("\n".join(lines) + "\n")
        result = run_pipeline(config_for(bundle, tmp_path / "out", parses=str(patched)))
        assert result.manifest["counts"]["treesim_failed_sentences"] == 1
        assert result.treesim.skipped_pairs > 0

    def test_treesim_identity_on_shared_subtrees(self, tmp_path):
        # every occurrence of a sentence shares the parse; with one sentence
        # per cluster-type and identical templates the summary stays in [0,1]
        bundle = bundle_for(tmp_path, noise=0.02)
        result = run_pipeline(config_for(bundle, tmp_path / "out"))
        s = result.treesim
        assert 0.0 <= s.precision <= 1.0
        assert 0.0 <= s.recall <= 1.0
        assert 0.0 <= s.matched_brackets <= 1.0
        assert 0.0 <= s.tag_accuracy <= 1.0
        assert s.pair_count > 0

    def test_positional_support_identity(self, tmp_path):
        bundle = bundle_for(tmp_path)
        result = run_pipeline(config_for(bundle, tmp_path / "out"))
        av = result.series["AV"]
        assert sum(av.support.values()) == result.manifest["counts"]["tokens"]


class TestAnalysisConfig:
    def test_validation_collects_problems(self, tmp_path):
        config = AnalysisConfig(
            vectors=str(tmp_path / "missing.hsv"),
            tokens=str(tmp_path / "missing.tsv"),
            out_dir=str(tmp_path / "out"),
            n=0,
            min_freq=5,
            max_freq=1,
            exclusion="bogus",
        )
        with pytest.raises(ConfigError) as err:
            config.validate()
        message = str(err.value)
        for fragment in ("n must be", "min_freq", "exclusion", "vectors path"):
            assert fragment in message

    def test_embeddings_require_vocab(self, tmp_path):
        bundle = bundle_for(tmp_path)
        config = config_for(bundle, tmp_path / "out", vocab=None)
        with pytest.raises(ConfigError):
            config.validate()

    def test_from_file_with_overrides(self, tmp_path):
        bundle = bundle_for(tmp_path)
        config_path = tmp_path / "config.yaml"
        config_path.write_text(
            yaml.safe_dump(
                {
                    "vectors": str(bundle.vectors),
                    "tokens": str(bundle.tokens),
                    "out_dir": str(tmp_path / "out"),
                    "n": 3,
                    "min_freq": 1,
                    "max_freq": 100,
                }
            )
        )
        config = AnalysisConfig.from_file(config_path, overrides={"n": 7, "threads": None})
        assert config.n == 7  # flag wins
        assert config.min_freq == 1

    def test_from_file_rejects_unknown_keys(self, tmp_path):
        config_path = tmp_path / "config.yaml"
        config_path.write_text("vectors: a\ntokens: b\nout_dir: c\nbogus: 1\n")
        with pytest.raises(ConfigError):
            AnalysisConfig.from_file(config_path)

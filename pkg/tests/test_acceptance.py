"""One test per acceptance criterion.  Each prints a PASS or FAIL line and is
held to its time limit."""
import contextlib
import fnmatch
import hashlib
import time
from pathlib import Path

import test_align
import test_metrics
import test_pairing
import test_splits
import test_textclean
from conftest import run_pipeline
from versekit.align import TokenizedCorpus, smt_decode, tokenize, train_fast_align, train_hmm, train_ibm1, train_smt
from versekit.extract import RANGE, extract_translation
from versekit.metrics import WHITESPACE_MODEL, bleu, score_lines, spbleu
from versekit.tasks.pairing import load_family, replay, select_pairing
from versekit.toy import write_toy_project
from versekit.versification import VersificationScheme, all_schemes, canonical_index, load_scheme


@contextlib.contextmanager
def criterion(capsys, number: int, name: str, limit: float):
    t0 = time.monotonic()
    try:
        yield
        elapsed = time.monotonic() - t0
        assert elapsed < limit, f"took {elapsed:.1f} s, limit {limit} s"
    except BaseException as err:
        with capsys.disabled():
            print(f"\nFAIL criterion {number}: {name} ({err})")
        raise
    with capsys.disabled():
        print(f"\nPASS criterion {number}: {name} ({elapsed:.2f} s, limit {limit} s)")


def test_criterion_1_canonical_index(capsys):
    with criterion(capsys, 1, "canonical index has 41899 verses, 7957 in NT", 1.0):
        index = canonical_index(load_scheme(VersificationScheme.ORIGINAL))
        assert len(index) == 41_899
        assert len(index.section_slice("NT")) == 7_957


def test_criterion_2_golden_extract(capsys, fixtures_dir):
    with criterion(capsys, 2, "fixture extract matches the golden file byte for byte", 1.0):
        files = sorted((fixtures_dir / "usfm").glob("*.SFM"))
        assert len(files) == 3
        extract, _, _, _ = extract_translation("tst", files, all_schemes())
        golden = (fixtures_dir / "golden" / "tst-golden.txt").read_bytes()
        assert extract.to_text().encode("utf-8") == golden
        assert sum(1 for line in extract.lines if line == RANGE) == 1


def test_criterion_3_cleaning(capsys):
    with criterion(capsys, 3, "cleaning fixtures and idempotence on 10k fuzz lines", 10.0):
        clean = test_textclean.clean
        assert clean("ﬁnd") == "find"
        a = test_textclean.AMIN
        assert clean(f"A{a}", "Cyrl") == f"А{a}"
        assert clean("a ,b,, c") == "a, b, c"
        lines = test_textclean.fuzz_lines(10_000)
        for script in (None, "Cyrl", "Latn", "Deva"):
            assert test_textclean.idempotence_failures(lines, script) == []


def test_criterion_4_alignment(capsys):
    with criterion(capsys, 4, "HMM and IBM1 oracles, monotone EM", 60.0):
        assert test_align.max_hmm_posterior_error(200) <= 1e-9
        assert test_align.ibm1_max_error(5) <= 1e-6
        corpus = TokenizedCorpus.from_tokens(test_align.synthetic_corpus(150))
        for trainer in (train_ibm1, train_hmm, train_fast_align):
            model = trainer(corpus, iterations=10)
            assert len(model.log_likelihood) == 10
            assert test_align.is_monotone(model.log_likelihood, 1e-9), trainer.__name__


def test_criterion_5_pairing_replay(capsys):
    with criterion(capsys, 5, "all eight pairing triples reproduced and replayed", 1.0):
        for family, triple in test_pairing.PUBLISHED.items():
            decision = select_pairing(load_family(family))
            assert decision.triple == triple, family
            assert replay(decision.audit) == triple
            for role in ("source", "target", "related"):
                steps = [e for e in decision.audit if e.role == role]
                assert steps[0].rule == "candidates" and steps[-1].rule == "select"
        test_pairing.test_otomanguean_outlier_is_excluded()
        test_pairing.test_sino_tibetan_script_preference()


def test_criterion_6_split_contracts(capsys):
    with criterion(capsys, 6, "CV folds, book lists and related-language containment", 10.0):
        test_splits.test_cv_fold_contract()
        for name in test_splits.EXPECTED_BOOKS:
            test_splits.test_book_task_lists(name)
        test_splits.test_book_task_sets_are_subsets_of_the_lists()
        test_splits.test_related_train_contains_target_test_verses()


def test_criterion_7_metric_oracles(capsys):
    with criterion(capsys, 7, "metrics agree with brute force on 50 cases", 30.0):
        worst = test_metrics.metric_oracle_errors()
        for key in ("bleu", "chrf3", "wer", "ter"):
            assert worst[key] <= 1e-4, key
        assert worst["ter_le_wer"] <= 0.0
        lines = [h for h, _ in test_metrics.CASES if h]
        rep = score_lines(lines, lines, subword=WHITESPACE_MODEL)
        assert (rep.corpus["bleu"], rep.corpus["chrf3"], rep.corpus["wer"]) == (100.0, 100.0, 0.0)
        hyps = [h for h, _ in test_metrics.CASES]
        refs = [r for _, r in test_metrics.CASES]
        word = bleu([tokenize(h) for h in hyps], [tokenize(r) for r in refs]).score
        assert spbleu(hyps, refs, WHITESPACE_MODEL).score == word


def test_criterion_8_smt_sanity(capsys):
    with criterion(capsys, 8, "SMT baseline scores BLEU 100 on a bijective corpus", 30.0):
        lines = test_align.bijective_lines(500)
        table = train_smt(TokenizedCorpus.from_lines(lines), iterations=5)
        hyps = [smt_decode(s, table).split() for s, _ in lines]
        assert bleu(hyps, [t.split() for _, t in lines]).score == 100.0


# Outputs that may change with the seed: CV manifests and everything
# derived from them, plus the seeded subword model behind spBLEU.
SEED_DEPENDENT = ("splits/*/CV.*", "align/*/CV.fold*/*", "score/*/CV.fold*/*", "score/*/*/subword.json",
                  "score/*/*/report.json", "score/*/*/verses.tsv", "score/*/*/summary.txt",
                  "score/*/*/meta.json")


def tree(out: Path) -> dict[str, str]:
    return {p.relative_to(out).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(out.rglob("*")) if p.is_file() and p.relative_to(out).parts[0] != "_run"}


def test_criterion_9_determinism(capsys, tmp_path):
    with criterion(capsys, 9, "pipeline is byte deterministic; seed touches only seeded outputs", 120.0):
        trees = []
        for name, seed in (("a", "0"), ("b", "0"), ("c", "1")):
            config = write_toy_project(tmp_path / name)
            run_pipeline(config, "--seed", seed)
            trees.append(tree(config.parent / "out"))
        a, b, c = trees
        assert len(a) > 50
        assert a == b
        assert set(a) == set(c)
        changed = {k for k in a if a[k] != c[k]}
        assert any(fnmatch.fnmatch(k, "splits/*/CV.*") for k in changed)
        stray = sorted(k for k in changed if not any(fnmatch.fnmatch(k, g) for g in SEED_DEPENDENT))
        assert stray == [], stray

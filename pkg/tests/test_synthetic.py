
from cadfeat.ml import TimingTable, read_timings, write_timings
from cadfeat.parse import load_corpus, write_jsonl
from cadfeat.synthetic import BUNDLED_SIZE, TIME_LIMIT, build, bundled_paths, random_corpus


def test_bundled_files_match_generator(tmp_path):
    problems, timings = build()
    write_jsonl(problems, tmp_path / "c.jsonl")
    write_timings(timings, tmp_path / "t.csv")
    corpus, times = bundled_paths()
    assert (tmp_path / "c.jsonl").read_bytes() == corpus.read_bytes()
    assert (tmp_path / "t.csv").read_bytes() == times.read_bytes()


def test_bundled_data_is_valid():
    corpus, times = bundled_paths()
    problems = load_corpus(corpus)
    assert len(problems) == BUNDLED_SIZE
    table = TimingTable(read_timings(times))
    assert sorted(table.problem_ids) == sorted(p.id for p in problems)
    for pid in table.problem_ids:
        for o, t in table.times[pid].items():
            assert (table.status[pid][o] == "timeout") == (t == TIME_LIMIT)
            assert 0 < t <= TIME_LIMIT


def test_generator_is_seeded():
    a = [p.to_native() for p in random_corpus(5, 1)]
    assert a == [p.to_native() for p in random_corpus(5, 1)]
    assert a != [p.to_native() for p in random_corpus(5, 2)]

import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agenthive.datasets import QuestionInstance
from agenthive.errors import AppendAfterReport, CorruptTrace, PhasePayloadMismatch
from agenthive.memory_pool import (
    SYSTEM,
    AgentOutput,
    DebateArgument,
    DebateKind,
    MemoryPool,
    Phase,
    Report,
    ResolutionMode,
    RoleFinal,
    RoleProposal,
)

QUESTION = QuestionInstance("q", "Which option?", ("A", "B", "C", "D"), gold="B")


@pytest.fixture
def pool(mcq):
    p = MemoryPool()
    p.append(mcq, SYSTEM, Phase.QUERY_INIT, 0)
    return p


def test_first_append_gets_seq_zero(mcq):
    p = MemoryPool()
    assert p.append(mcq, SYSTEM, Phase.QUERY_INIT, 0) == 0


def test_seq_is_contiguous(pool):
    assert pool.append(RoleProposal("Surgeon", "acute abdomen"), "A0", Phase.ROLE_PROPOSAL) == 1
    assert pool.append(RoleProposal("Geriatrician", "age"), "A1", Phase.ROLE_PROPOSAL) == 2


def test_append_after_report_is_rejected(pool):
    pool.append(Report("C", ResolutionMode.CONFIRMATORY, "trace"), "reporter", Phase.REPORT, 3)
    with pytest.raises(AppendAfterReport):
        pool.append(AgentOutput("r", "C", 0.5), "A0", Phase.FUSION, 4)
    assert pool.sealed


def test_phase_payload_mismatch(pool):
    with pytest.raises(PhasePayloadMismatch):
        pool.append(RoleFinal("Surgeon", "why"), "A0", Phase.ANALYSIS, 1)


def test_first_entry_must_be_query(mcq):
    with pytest.raises(PhasePayloadMismatch):
        MemoryPool().append(AgentOutput("r", "C", 0.5), "A0", Phase.ANALYSIS, 1)


def test_confidence_range_enforced():
    with pytest.raises(ValueError):
        AgentOutput("r", "C", 1.2)


def test_rebuttal_requires_target():
    with pytest.raises(ValueError):
        DebateArgument(DebateKind.REBUTTAL, "no target")
    with pytest.raises(ValueError):
        DebateArgument(DebateKind.DEFENSE, "has target", target=1)


class TestReads:
    def test_empty_pool_reads_empty(self):
        assert MemoryPool().read_all() == ()

    def test_read_all_in_seq_order(self, pool):
        pool.append(RoleProposal("x", "y"), "A0", Phase.ROLE_PROPOSAL)
        pool.append(RoleProposal("x", "y"), "A1", Phase.ROLE_PROPOSAL)
        assert [e.seq for e in pool.read_all()] == [0, 1, 2]

    def test_snapshot_is_stable(self, pool):
        snap = pool.read_all()
        pool.append(RoleProposal("x", "y"), "A0", Phase.ROLE_PROPOSAL)
        assert len(snap) == 1
        assert len(pool.read_all()) == 2

    def test_read_phase_round_filters(self, pool):
        for i in range(5):
            pool.append(AgentOutput("r", "C", 0.5), f"A{i}", Phase.ANALYSIS, 1)
        for i in range(5):
            pool.append(AgentOutput("r", "C", 0.5), f"A{i}", Phase.FUSION, 2)
        assert len(pool.read_phase_round(Phase.FUSION, 2)) == 5
        assert len(pool.read_phase_round(Phase.ANALYSIS, 1)) == 5
        assert pool.read_phase_round(Phase.DEBATE, 1) == ()


def test_concurrent_appends_keep_total_order(pool):
    def writer(i):
        for j in range(50):
            pool.append(AgentOutput(f"{i}-{j}", "A", 0.5), f"A{i}", Phase.ANALYSIS, 1)

    threads = [threading.Thread(target=writer, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    entries = pool.read_all()
    assert [e.seq for e in entries] == list(range(401))


_payloads = st.one_of(
    st.builds(lambda r, a, c: (AgentOutput(r, a, c), Phase.ANALYSIS),
              st.text(max_size=30), st.sampled_from("ABCD"), st.floats(0, 1)),
    st.builds(lambda r, a, c: (AgentOutput(r, a, c), Phase.FUSION),
              st.text(max_size=30), st.sampled_from("ABCD"), st.floats(0, 1)),
    st.builds(lambda t: (DebateArgument(DebateKind.DEFENSE, t or "x"), Phase.DEBATE), st.text(max_size=30)),
    st.builds(lambda t, j: (DebateArgument(DebateKind.REBUTTAL, t or "x", j), Phase.DEBATE),
              st.text(max_size=30), st.integers(0, 6)),
    st.builds(lambda r, t: (RoleProposal(r, t), Phase.ROLE_PROPOSAL), st.text(max_size=20), st.text(max_size=20)),
)


@settings(max_examples=60, deadline=None)
@given(items=st.lists(st.tuples(_payloads, st.integers(0, 6), st.integers(0, 5)), max_size=25))
def test_pool_properties(items):
    pool = MemoryPool()
    pool.append(QUESTION, SYSTEM, Phase.QUERY_INIT, 0)
    reads = [pool.read_all()]
    for (payload, phase), agent, rnd in items:
        pool.append(payload, f"A{agent}", phase, rnd)
        reads.append(pool.read_all())
    # append-only: every earlier read is a prefix of every later read
    for earlier, later in zip(reads, reads[1:]):
        assert later[: len(earlier)] == earlier
    # partition: (phase, round) filters reconstruct the whole log
    everything = pool.read_all()
    keys = {(e.phase, e.round) for e in everything}
    rebuilt = sorted((e for k in keys for e in pool.read_phase_round(*k)), key=lambda e: e.seq)
    assert rebuilt == list(everything)
    # serialization round-trip
    assert MemoryPool.loads(pool.dumps()).read_all() == everything
    # seq order agrees with timestamp order
    stamps = [e.timestamp for e in everything]
    assert stamps == sorted(stamps)


class TestTraceFile:
    def test_round_trip_with_report(self, pool, tmp_path):
        pool.append(AgentOutput("because", "C", 0.85), "A0", Phase.ANALYSIS, 1)
        pool.append(DebateArgument(DebateKind.REBUTTAL, "Addressing A2", 2), "A0", Phase.DEBATE, 1)
        pool.append(Report("C", ResolutionMode.WEIGHTED_VOTE, "t"), "reporter", Phase.REPORT, 2)
        path = tmp_path / "run.trace"
        pool.save(path)
        loaded = MemoryPool.load(path)
        assert loaded.read_all() == pool.read_all()
        assert loaded.sealed

    def test_record_fields(self, pool):
        import json

        rec = json.loads(pool.dumps().splitlines()[0])
        assert set(rec) == {"seq", "timestamp", "author", "phase", "round", "payload"}
        assert rec["timestamp"].endswith("+00:00")

    def test_truncated_file_names_last_valid_seq(self, pool):
        for i in range(3):
            pool.append(AgentOutput("r", "C", 0.5), f"A{i}", Phase.ANALYSIS, 1)
        text = pool.dumps()
        truncated = text[: len(text) - 25]
        with pytest.raises(CorruptTrace) as info:
            MemoryPool.loads(truncated)
        assert info.value.last_valid_seq == 2

    def test_gap_in_seq_is_corrupt(self, pool):
        pool.append(AgentOutput("r", "C", 0.5), "A0", Phase.ANALYSIS, 1)
        lines = pool.dumps().splitlines(keepends=True)
        with pytest.raises(CorruptTrace):
            MemoryPool.loads(lines[1])

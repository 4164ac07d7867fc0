import io
import itertools

import networkx as nx
import numpy as np
import pytest

from fairscope.audit import load_fixture
from fairscope.metrics import DEFAULT_SUPPORTS, EvalSet, Support, reconstruct_counts
from fairscope.records import FUSED_ORDER, FusedLabel, Gender, PredictionRecord, RecordSet, Regime, Veracity
from fairscope.preprocess import Clip


@pytest.fixture(scope="session")
def fixture_table():
    return load_fixture()


def random_records(rng, n, models=("m1",), regimes=(Regime.REGULAR,), genders=tuple(Gender)):
    recs = []
    for i in range(n):
        recs.append(PredictionRecord(
            model_id=str(rng.choice(models)),
            regime=regimes[rng.integers(len(regimes))],
            subject_id=f"s{rng.integers(10)}",
            gender=genders[rng.integers(len(genders))],
            video_id=f"v{i}",
            veracity=Veracity.GENUINE,
            true_label=FUSED_ORDER[rng.integers(4)],
            prediction=FUSED_ORDER[rng.integers(4)],
        ))
    return RecordSet(recs)


def zero_diagonal_transport(fn, fp):
    """Off-diagonal 4x4 integer matrix with row sums fn and column sums fp (max-flow)."""
    g = nx.DiGraph()
    for c in range(4):
        g.add_edge("s", ("r", c), capacity=fn[c])
        g.add_edge(("c", c), "t", capacity=fp[c])
        for d in range(4):
            if d != c:
                g.add_edge(("r", c), ("c", d), capacity=10**6)
    value, flow = nx.maximum_flow(g, "s", "t")
    assert value == sum(fn) == sum(fp), "no zero-diagonal matrix with these margins"
    m = np.zeros((4, 4), dtype=int)
    for c in range(4):
        for d in range(4):
            if d != c:
                m[c, d] = flow[("r", c)].get(("c", d), 0)
    return m


def matrix_from_published(tbl, model, regime, group):
    """Confusion matrix whose one-vs-rest counts reproduce the published rates of one slice."""
    pos, neg = DEFAULT_SUPPORTS[group]
    counts = [reconstruct_counts(tbl[(model, regime, group, c)], Support(pos, neg)).counts for c in FUSED_ORDER]
    m = zero_diagonal_transport([k.fn for k in counts], [k.fp for k in counts])
    for i, k in enumerate(counts):
        m[i, i] = k.tp
    return m


def records_from_published(tbl, regimes=tuple(Regime)):
    """Prediction records whose female/male slices reproduce the fixture's gender-set tables."""
    recs = []
    for regime in regimes:
        for model in tbl.models(regime):
            for group, gender in ((EvalSet.FEMALE, Gender.FEMALE), (EvalSet.MALE, Gender.MALE)):
                m = matrix_from_published(tbl, model, regime, group)
                serial = itertools.count()
                for t, p in itertools.product(range(4), range(4)):
                    for _ in range(m[t, p]):
                        i = next(serial)
                        recs.append(PredictionRecord(
                            model, regime, f"{gender.value[0].upper()}{i % 5}", gender,
                            f"{gender.value}-{i:03d}", Veracity.GENUINE, FUSED_ORDER[t], FUSED_ORDER[p],
                        ))
    return RecordSet(recs)


def make_clip(rng, n_frames, h=8, w=8, scenes=4):
    """Clip made of a few noisy 'scenes' so clustering has structure to find."""
    bases = rng.integers(0, 256, size=(scenes, h, w, 3))
    owner = np.sort(rng.integers(0, scenes, size=n_frames))
    noise = rng.integers(-6, 7, size=(n_frames, h, w, 3))
    return Clip(np.clip(bases[owner] + noise, 0, 255).astype(np.uint8))


def csv_stream(text):
    return io.StringIO(text)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

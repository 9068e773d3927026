import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from erploop.errors import RecorderError, SchemaError
from erploop.metrics import itr
from erploop.recorder import (
    EEG_HEADER,
    RUN_METADATA_FIELDS,
    SessionRecorder,
    decode_trigger,
    encode_trigger,
    read_eeg,
    read_session,
    triggers_from_column,
    write_eeg,
    write_run_metadata,
)
from erploop.stimulus import TextureSpec, TriggerEvent
from erploop.tasks import RunTally

GOLDEN = Path(__file__).parent / "data" / "golden_session"


def build_golden(out_dir) -> Path:
    """Small fully deterministic session used as the on-disk format fixture."""
    rec = SessionRecorder(
        out_dir,
        session_id="s_golden",
        fs=250.0,
        seed=7,
        session_info={"profile": {"erp_amp": 5.0}, "n_cues": 3},
    )
    k = np.arange(75)
    base = np.round(np.sin(2 * np.pi * 3.0 * k / 250.0) * 4.0, 4)
    chans = np.vstack([base * (i + 1) * 0.1 for i in range(8)])
    trig0 = TriggerEvent(t=0.0, target_id=0, cycle_index=0, context="calibration")
    trig1 = TriggerEvent(t=0.1, target_id=3, cycle_index=0, context="task_b")
    rec.on_block(0, chans[:, :25], trig0)
    rec.on_block(25, chans[:, 25:50], trig1)
    rec.on_block(50, chans[:, 50:], None)
    rec.on_events(
        [
            {"type": "flash", "t": 0.0, "target": 0, "cycle": 0, "context": "calibration"},
            {"type": "activation", "t": 2.0, "target": 3, "confidence": 0.96, "forced": False},
        ]
    )
    rec.add_calibration(phase="calibration_1", attempt=1, cue=4, cv_accuracy=0.91, grade="green")
    tally = RunTally(
        n_classes=10,
        t_start=0.0,
        task_type="speller",
        correct=2,
        incorrect=1,
        t_end=12.5,
        texture=TextureSpec("checkerboard"),
    )
    rec.add_run(
        phase="run_1",
        tally=tally,
        metrics=itr(10, 2, 1, 0.0, 12.5),
        calibration_attempts=1,
        cv_accuracy=0.91,
    )
    return rec.finalize()


def _tree_bytes(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_trigger_codes_round_trip() -> None:
    for context in ("calibration", "task_a", "task_b", "tutorial"):
        for target in (0, 5, 98):
            code = encode_trigger(context, target)
            assert decode_trigger(code) == (context, target)
    assert encode_trigger("calibration", 0) == 101
    assert encode_trigger("task_b", 3) == 304


def test_trigger_encode_rejects_bad_input() -> None:
    with pytest.raises(RecorderError):
        encode_trigger("lobby", 0)
    with pytest.raises(RecorderError):
        encode_trigger("calibration", 99)
    with pytest.raises(RecorderError):
        encode_trigger("calibration", -1)


def test_trigger_decode_rejects_bad_codes() -> None:
    with pytest.raises(SchemaError):
        decode_trigger(100)  # target slot 0 means "no event"
    with pytest.raises(SchemaError):
        decode_trigger(905)  # context code 9 unused
    with pytest.raises(SchemaError):
        decode_trigger(7)


def test_eeg_round_trip(tmp_path) -> None:
    rng = np.random.default_rng(0)
    data = rng.normal(size=(8, 40)) * 12.0
    trig = np.zeros(40, dtype=int)
    trig[0] = 101
    trig[25] = 304
    path = tmp_path / "eeg.csv"
    write_eeg(path, data, trig, fs=250.0)
    back, trig_back = read_eeg(path, fs=250.0)
    assert back.shape == (8, 40)
    np.testing.assert_allclose(back, data, atol=5e-5)
    assert np.array_equal(trig_back, trig)
    first_rows = path.read_text().splitlines()[:2]
    assert first_rows[0] == ",".join(EEG_HEADER)
    assert first_rows[1].startswith("0.000000,")


def test_eeg_write_checks_trigger_length(tmp_path) -> None:
    with pytest.raises(RecorderError):
        write_eeg(tmp_path / "x.csv", np.zeros((8, 10)), np.zeros(9, dtype=int), fs=250.0)


def test_eeg_read_rejects_wrong_header(tmp_path) -> None:
    path = tmp_path / "bad.csv"
    path.write_text("time,a,b\n0,1,2\n")
    with pytest.raises(SchemaError):
        read_eeg(path, fs=250.0)


def test_eeg_read_rejects_missing_values(tmp_path) -> None:
    path = tmp_path / "eeg.csv"
    write_eeg(path, np.ones((8, 5)), np.zeros(5, dtype=int), fs=250.0)
    lines = path.read_text().splitlines()
    lines[3] = lines[3].rsplit(",", 2)[0] + ",,0"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError):
        read_eeg(path, fs=250.0)


def test_triggers_reconstructed_from_column() -> None:
    col = np.zeros(100, dtype=int)
    col[10] = encode_trigger("calibration", 2)
    col[60] = encode_trigger("task_a", 4)
    events = triggers_from_column(col, fs=250.0)
    assert len(events) == 2
    assert events[0].t == pytest.approx(10 / 250.0)
    assert events[0].target_id == 2
    assert events[0].context == "calibration"
    assert events[1].context == "task_a"
    assert all(e.cycle_index == -1 for e in events)


def test_on_block_requires_contiguous_samples(tmp_path) -> None:
    rec = SessionRecorder(tmp_path, "s", fs=250.0, seed=0, session_info={})
    rec.on_block(0, np.zeros((8, 25)), None)
    with pytest.raises(RecorderError):
        rec.on_block(30, np.zeros((8, 25)), None)


def test_run_metadata_requires_finished_run(tmp_path) -> None:
    open_tally = RunTally(n_classes=10, t_start=0.0, task_type="speller", correct=1, incorrect=0)
    with pytest.raises(RecorderError):
        write_run_metadata(
            tmp_path / "r.json", "run_00_speller", open_tally, itr(10, 1, 0, 0.0, 5.0), 1, 0.9, 7
        )
    no_texture = RunTally(
        n_classes=10, t_start=0.0, task_type="speller", correct=1, incorrect=0, t_end=5.0
    )
    with pytest.raises(RecorderError):
        write_run_metadata(
            tmp_path / "r.json", "run_00_speller", no_texture, itr(10, 1, 0, 0.0, 5.0), 1, 0.9, 7
        )


def test_run_metadata_field_set_is_exact(tmp_path) -> None:
    tally = RunTally(
        n_classes=10,
        t_start=0.0,
        task_type="speller",
        correct=3,
        incorrect=1,
        t_end=20.0,
        texture=TextureSpec("grain", seed=2),
    )
    record = write_run_metadata(
        tmp_path / "r.json", "run_00_speller", tally, itr(10, 3, 1, 0.0, 20.0), 2, 0.85, 11
    )
    assert set(record) == RUN_METADATA_FIELDS
    on_disk = json.loads((tmp_path / "r.json").read_text())
    assert on_disk == record
    assert on_disk["accuracy"] == pytest.approx(0.75)
    assert on_disk["rng_seed"] == 11


def test_golden_fixture_regenerates_byte_identically(tmp_path) -> None:
    build_golden(tmp_path / "fresh")
    fresh = _tree_bytes(tmp_path / "fresh")
    committed = _tree_bytes(GOLDEN)
    assert set(fresh) == set(committed)
    for name in committed:
        assert fresh[name] == committed[name], f"{name} differs from committed fixture"


def test_read_session_parses_golden_fixture() -> None:
    log = read_session(GOLDEN)
    m = log.manifest
    assert m["session_id"] == "s_golden"
    assert m["seed"] == 7
    assert m["n_samples"] == 75
    assert m["n_triggers"] == 2
    assert m["runs"][0]["run_id"] == "run_00_speller"
    assert m["n_cues"] == 3
    data, trig = log.load_eeg()
    assert data.shape == (8, 75)
    assert np.flatnonzero(trig).tolist() == [0, 25]
    events = log.load_events()
    assert [e["type"] for e in events] == ["flash", "activation"]
    assert log.run_records[0]["correct"] == 2


def test_read_session_error_paths(tmp_path) -> None:
    with pytest.raises(SchemaError):
        read_session(tmp_path)  # no manifest at all

    sess = tmp_path / "sess"
    build_golden(sess)

    manifest_path = sess / "session.json"
    good = json.loads(manifest_path.read_text())

    bad = dict(good)
    bad["kind"] = "something-else"
    manifest_path.write_text(json.dumps(bad, sort_keys=True))
    with pytest.raises(SchemaError):
        read_session(sess)

    bad = {k: v for k, v in good.items() if k != "n_samples"}
    manifest_path.write_text(json.dumps(bad, sort_keys=True))
    with pytest.raises(SchemaError):
        read_session(sess)

    bad = dict(good)
    bad["format_version"] = good["format_version"] + 1
    manifest_path.write_text(json.dumps(bad, sort_keys=True))
    with pytest.raises(SchemaError):
        read_session(sess)

    manifest_path.write_text(json.dumps(good, sort_keys=True))
    (sess / "run_00_speller.json").unlink()
    with pytest.raises(SchemaError):
        read_session(sess)


def test_load_eeg_detects_truncation(tmp_path) -> None:
    sess = tmp_path / "sess"
    build_golden(sess)
    eeg = sess / "eeg.csv"
    lines = eeg.read_text().splitlines()
    eeg.write_text("\n".join(lines[:-10]) + "\n")
    log = read_session(sess)
    with pytest.raises(SchemaError):
        log.load_eeg()


def test_events_log_rejects_corrupt_lines(tmp_path) -> None:
    sess = tmp_path / "sess"
    build_golden(sess)
    ev = sess / "events.ndjson"
    ev.write_text(ev.read_text() + "{not json\n")
    log = read_session(sess)
    with pytest.raises(SchemaError):
        log.load_events()

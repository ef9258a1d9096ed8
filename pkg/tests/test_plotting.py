from ciot_battery.lifetime import SWEEP_COLUMNS, SweepGrid, sweep
from ciot_battery.plotting import RECIPES, read_sweep_csv, render_all


def _csv():
    import csv
    import io

    rows = sweep(SweepGrid(devices=("n211", "r410m-ltem"), scenarios=("good", "extreme"), payloads=(10, 100),
                           cycles_hours=(1.0, 24.0)))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(SWEEP_COLUMNS), lineterminator="\n")
    w.writeheader()
    w.writerows(r.as_record() for r in rows)
    return buf.getvalue()


def test_error_rows_dropped():
    rows = read_sweep_csv(_csv())
    assert len(rows) == 12
    assert not any(r["device"] == "r410m-ltem" and r["scenario"] == "extreme" for r in rows)


def test_render_is_byte_stable(tmp_path):
    text = _csv()
    a = render_all(text, tmp_path / "a")
    b = render_all(text, tmp_path / "b")
    assert [p.name for p in a] == [f"{r}.svg" for r in RECIPES]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
        assert pa.read_bytes().startswith(b"<?xml")


def test_render_empty_csv(tmp_path):
    header = ",".join(SWEEP_COLUMNS) + "\n"
    assert len(render_all(header, tmp_path)) == len(RECIPES)

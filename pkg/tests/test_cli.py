import json
import os

import pytest

from ntalab import zoo
from ntalab.cli import ConfigError, parse_config, rerun, run
from ntalab.cli.main import main

WOS = """[experiment]
name = wos
out = {out}

[domain]
kind = square
resolution = 8

[wos]
walks = 20000
seed = 7
cells = 4
partition = order
"""


def test_config_round_trip_and_digest(tmp_path):
    cfg = parse_config(WOS.format(out=tmp_path))
    again = parse_config(cfg.to_ini())
    assert again == cfg
    assert again.digest() == cfg.digest()
    moved = parse_config(WOS.format(out=tmp_path / "elsewhere"))
    assert moved.digest() == cfg.digest()
    other = parse_config(WOS.format(out=tmp_path).replace("seed = 7", "seed = 8"))
    assert other.digest() != cfg.digest()
    assert cfg.params["shell"] == 1e-4 and cfg.params["walks"] == 20000


@pytest.mark.parametrize("text,where", [
    ("", "[experiment] name"),
    ("[experiment]\nname = wos\n[domain]\nkind = square\n", "[wos] seed"),
    (WOS.format(out=".").replace("walks", "walkz"), "[wos] walkz: unknown key"),
    (WOS.format(out=".").replace("walks = 20000", "walks = many"), "[wos] walks: cannot read"),
    (WOS.format(out=".").replace("kind = square", "kind = blob"), "[domain] kind"),
    ("[experiment]\nname = wos\n[wos]\nseed = 1\n", "[domain]"),
    ("[experiment]\nname = dance\n", "unknown experiment"),
    ("[experiment]\nname = schedule\n[schedule]\nM = 2\ngamma = 4\neps = 0.1\n[wos]\nseed = 1\n", "[wos]"),
])
def test_config_errors_name_the_key(text, where):
    with pytest.raises(ConfigError) as ei:
        parse_config(text, "cfg.ini")
    assert where in str(ei.value)
    assert "cfg.ini" in str(ei.value)


def test_hash_named_report_and_rerun(tmp_path):
    cfg = parse_config(WOS.format(out=tmp_path))
    rep = run(cfg)
    path = tmp_path / f"wos-{cfg.digest()}.json"
    data = json.loads(path.read_text())
    assert data["config_hash"] == cfg.digest()
    assert data["status"] == rep.status == "pass"
    assert (tmp_path / f"wos-{cfg.digest()}-cells.csv").exists()
    again = rerun(path)
    assert again.result["counts"] == data["result"]["counts"]
    assert again.verdicts == data["verdicts"]
    # reuse leaves the file alone
    mtime = os.stat(path).st_mtime_ns
    same = run(cfg, force=False)
    assert os.stat(path).st_mtime_ns == mtime
    assert same.result["counts"] == data["result"]["counts"]
    assert not [p for p in os.listdir(tmp_path) if p.startswith(".") or p.endswith(".tmp")]


def test_schedule_report(tmp_path):
    out = tmp_path / "s.json"
    assert main(["schedule", "--M", "2", "--gamma", "4", "--eps", "0.1", "--out", str(out)]) == 0
    r = json.loads(out.read_text())["result"]
    assert r["beta"]["exact"] == "2/3"
    assert r["N"]["exact"] == "400"
    assert r["zeta"]["exact"] == "9600"
    assert r["h0"]["exact"] == "32"


def _approx(tmp_path, tag):
    out, fig = tmp_path / f"{tag}.json", tmp_path / f"{tag}.svg"
    code = main(["approximate", "--kind", "square", "--resolution", "64", "--Q", "0.5,0", "--r", "0.5",
                 "--M", "2", "--out", str(out), "--svg", str(fig)])
    return code, json.loads(out.read_text()), fig.read_bytes()


def test_approximate_square_and_deterministic_svg(tmp_path):
    code, rep, fig = _approx(tmp_path, "a")
    assert code == 0
    assert all(v["status"] == "pass" for v in rep["verdicts"])
    for layer in ("boundary", "trapezoid", "omega_L", "T_Gamma", "labels"):
        assert f'<g id="{layer}"'.encode() in fig
    _, rep2, fig2 = _approx(tmp_path, "b")
    assert fig2 == fig
    assert rep2["result"] == rep["result"]


def test_density_sweep_figure(tmp_path):
    out = tmp_path / "d.json"
    assert main(["density-sweep", "--levels", "0..5", "--out", str(out)]) == 0
    svg = (tmp_path / "d-sweep.svg").read_text()
    assert "fitted slope 0.26" in svg
    rows = (tmp_path / "d-gamma.csv").read_text().splitlines()
    assert rows[0].startswith("level,r,gamma")
    assert len(rows) == 1 + 6 * 5


def test_generate_writes_loadable_mesh(tmp_path):
    out = tmp_path / "k.mesh"
    assert main(["generate", "--kind", "koch_curve", "--level", "2", "--out", str(out)]) == 0
    m = zoo.load_mesh(out)
    assert m.n_elements == 3 * 4 ** 2


def test_exit_codes(tmp_path, capsys):
    o = str(tmp_path)
    assert main(["wos", "--kind", "square", "--resolution", "8", "--walks", "1000", "--outdir", o]) == 0
    assert main(["wos", "--mesh", str(tmp_path / "missing.mesh"), "--outdir", o]) == 1
    assert main(["wos", "--kind", "square", "--pole", "3,3", "--outdir", o]) == 1
    assert main(["verify-corkscrew", "--kind", "disk", "--resolution", "512", "--M", "1.01", "--R", "0.5",
                 "--budget", "30", "--outdir", o]) == 2
    assert main(["ainfty", "--kind", "disk", "--resolution", "512", "--Q", "1,0", "--scales", "0.05",
                 "--pole", "0,0", "--walks", "2000", "--trials", "10", "--outdir", o]) == 3
    err = capsys.readouterr().err
    assert "error:" in err

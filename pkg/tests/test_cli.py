"""Command-line interface: outputs, determinism, exit codes."""
import numpy as np
import pytest

from doubleslit.cli import main
from doubleslit.pgm import read_pgm, write_pgm

MINI_CONFIG = """\
sampler.n_events = 30
buildup.checkpoints = 2, 7, 30
run.seed = 7
"""


@pytest.fixture()
def mini_config(tmp_path):
    path = tmp_path / "mini.cfg"
    path.write_text(MINI_CONFIG)
    return str(path)


def read_metrics(path):
    out = {}
    for line in path.read_text().splitlines():
        key, value = line.split("=")
        out[key] = float(value)
    return out


def run(*argv):
    return main(list(argv))


def test_pattern_outputs(tmp_path, mini_config):
    out = tmp_path / "out"
    assert run("pattern", "--config", mini_config, "--out", str(out), "--image") == 0
    lines = (out / "pattern.csv").read_text().splitlines()
    assert lines[0] == "x_m,intensity"
    assert len(lines) == 1 + 65536
    meta = (out / "pattern.meta").read_text()
    assert "beam.energy = 600 eV" in meta
    assert "derived.wavelength_m" in meta
    assert meta.count("assumed") >= 2
    image = read_pgm(out / "pattern.pgm")
    assert image.shape == (32, 416)
    assert image.max() == 65535


def test_pattern_mask_changes_profile(tmp_path, mini_config):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert run("pattern", "--config", mini_config, "--out", str(a)) == 0
    assert run("pattern", "--config", mini_config, "--out", str(b),
               "--mask-center", "none") == 0
    masked = (a / "pattern.csv").read_bytes()
    free = (b / "pattern.csv").read_bytes()
    assert masked != free


def test_sweep_manifest(tmp_path, mini_config):
    out = tmp_path / "sweep"
    assert run("sweep", "--config", mini_config, "--out", str(out),
               "--from", "-2.8 um", "--to", "2.8 um", "--steps", "5") == 0
    lines = (out / "manifest.csv").read_text().splitlines()
    assert lines[0] == "index,center_m,fraction_slit1,fraction_slit2,label,file"
    rows = [line.split(",") for line in lines[1:]]
    assert [r[4] for r in rows] == ["blocked", "both", "both", "both", "blocked"]
    f1 = [float(r[2]) for r in rows]
    f2 = [float(r[3]) for r in rows]
    # Reflecting the mask center swaps the slit roles.
    assert f1 == pytest.approx(f2[::-1], abs=1e-12)
    for row in rows:
        assert (out / row[5]).exists()
    assert (out / "sweep.meta").exists()


def test_sweep_rejects_degenerate_ranges(tmp_path, mini_config, capsys):
    out = tmp_path / "x"
    assert run("sweep", "--config", mini_config, "--out", str(out),
               "--from", "0", "--to", "1 um", "--steps", "1") == 2
    assert "steps" in capsys.readouterr().err
    assert run("sweep", "--config", mini_config, "--out", str(out),
               "--from", "1 um", "--to", "1 um", "--steps", "3") == 2


def test_buildup_outputs(tmp_path, mini_config):
    out = tmp_path / "run"
    assert run("buildup", "--config", mini_config, "--out", str(out)) == 0
    events = (out / "events.csv").read_text().splitlines()
    assert events[0] == "index,t_s,x_m,y_m"
    assert len(events) == 1 + 30
    assert (out / "blobs.csv").exists()
    for count in (2, 7, 30):
        assert (out / f"buildup_{count:06d}.pgm").exists()
    assert (out / "buildup_final.pgm").exists()
    metrics = read_metrics(out / "metrics.txt")
    assert metrics["n_events"] == 30
    # Isolated events at this rate: detection should recover nearly all.
    assert abs(metrics["n_blobs"] - 30) <= 2
    assert "buildup.sampling_half_width_m" in (out / "buildup.meta").read_text()


def test_buildup_checkpoint_override(tmp_path, mini_config):
    out = tmp_path / "ck"
    assert run("buildup", "--config", mini_config, "--out", str(out),
               "--checkpoints", "5,30") == 0
    assert (out / "buildup_000005.pgm").exists()
    assert not (out / "buildup_000002.pgm").exists()


def test_buildup_rerun_is_byte_identical(tmp_path, mini_config):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert run("buildup", "--config", mini_config, "--out", str(a)) == 0
    assert run("buildup", "--config", mini_config, "--out", str(b)) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_seed_flag_overrides_config(tmp_path, mini_config):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert run("buildup", "--config", mini_config, "--out", str(a), "--seed", "8") == 0
    assert run("buildup", "--config", mini_config, "--out", str(b)) == 0
    assert (a / "events.csv").read_bytes() != (b / "events.csv").read_bytes()
    # A config without run.seed works once the flag supplies one.
    bare = tmp_path / "bare.cfg"
    bare.write_text("sampler.n_events = 5\n")
    assert run("pattern", "--config", str(bare), "--out", str(tmp_path / "c"),
               "--seed", "3") == 0


def spot_image(shape, spots):
    y, x = np.mgrid[0 : shape[0], 0 : shape[1]]
    img = np.zeros(shape)
    for cx, cy, sigma in spots:
        img += 1000.0 * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * sigma**2))
    return np.rint(img).astype(np.uint16)


def test_detect_on_frame_files(tmp_path, mini_config, capsys):
    f1 = tmp_path / "one.pgm"
    f2 = tmp_path / "two.pgm"
    write_pgm(f1, spot_image((64, 64), [(20, 30, 3.0), (45, 20, 2.5)]))
    write_pgm(f2, spot_image((64, 64), [(32, 32, 3.0)]))
    out = tmp_path / "det"
    assert run("detect", "--config", mini_config, "--out", str(out),
               str(f1), str(f2)) == 0
    stdout = capsys.readouterr().out
    assert "total: 3 blobs in 2 frames" in stdout
    one = (out / "one_blobs.csv").read_text().splitlines()
    assert one[0] == "frame,t_s,x_px,y_px,scale_t,response"
    assert len(one) == 3
    assert len((out / "two_blobs.csv").read_text().splitlines()) == 2


def test_detect_bad_frame_exits_3(tmp_path, mini_config, capsys):
    good = tmp_path / "ok.pgm"
    write_pgm(good, spot_image((32, 32), [(16, 16, 3.0)]))
    bad = tmp_path / "short.pgm"
    bad.write_bytes(good.read_bytes()[:-100])
    assert run("detect", "--config", mini_config, str(bad)) == 3
    assert "short.pgm" in capsys.readouterr().err


def test_missing_files_argument_is_usage_error(mini_config):
    with pytest.raises(SystemExit) as info:
        run("detect", "--config", mini_config)
    assert info.value.code == 2


def test_invalid_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("slits.width = -50 nm\nrun.seed = 1\n")
    assert run("pattern", "--config", str(cfg), "--out", str(tmp_path / "o")) == 2
    assert "slits.width" in capsys.readouterr().err
    cfg.write_text("slits.width = 50 nm\n")
    assert run("pattern", "--config", str(cfg), "--out", str(tmp_path / "o")) == 2
    assert "run.seed" in capsys.readouterr().err

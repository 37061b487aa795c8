import csv
import math
from os.path import dirname, join

import pytest
from scipy import special

from harq_mac import __version__
from harq_mac.cli import main
from harq_mac.commands.sweep import HEADER, SweepConfig, point_seed, run_sweep
from harq_mac.constants import CDTDMA_INR, JOINT_DECODING, STATIC_TDMA
from harq_mac.exceptions import ArgumentError, ConfigurationError
from harq_mac.items import SystemSpec
from harq_mac.registry import create_policy
from harq_mac.settings import get_settings
from harq_mac.special import derive_seed

QUICK = ["--settings", "harq_mac.settings.quick"]
SWEEP_CONFIG = join(dirname(__file__), "files", "sweep.cfg")

settings = get_settings("harq_mac.settings.quick")


def output_value(output, name):
    for line in output.splitlines():
        if line.startswith(f"{name}:"):
            return line.split(":", 1)[1].strip()
    raise AssertionError(f"{name} missing from output")


def read_rows(path):
    with open(path) as handle:
        lines = handle.read().splitlines()
    comments = [line for line in lines if line.startswith("#")]
    rows = list(csv.DictReader(line for line in lines if not line.startswith("#")))
    return comments, rows


def test_capacity(capsys):
    """Test the capacity command at the unit water level."""
    pbar = math.exp(-1.0) - special.exp1(1.0)
    snr_db = repr(10.0 * math.log10(pbar))
    assert main(["capacity", "-K", "1", "--snr-db", snr_db, *QUICK]) == 0
    output = capsys.readouterr().out
    assert float(output_value(output, "capacity_nats")) == pytest.approx(
        0.2193839344, abs=1e-9
    )
    assert float(output_value(output, "water_level")) == pytest.approx(1.0, rel=1e-8)


def test_capacity_paper_convention(capsys):
    """Test that the "paper" convention is accepted below its power cap."""
    argv = ["capacity", "-K", "2", "--snr-db", "-10", "--convention", "paper"]
    assert main([*argv, *QUICK]) == 0
    assert output_value(capsys.readouterr().out, "convention") == "paper"


def test_global_options_before_command(capsys):
    """Test that global options are accepted before the subcommand."""
    assert main([*QUICK, "capacity", "-K", "2", "--snr-db", "0"]) == 0
    assert output_value(capsys.readouterr().out, "users") == "2"


def test_usage_errors():
    """Test that malformed input exits with code 1."""
    assert main(["capacity", "-K", "0", "--snr-db", "0", *QUICK]) == 1
    assert main(["capacity", "-K", "2", *QUICK]) == 1
    assert main(["simulate-all", *QUICK]) == 1
    for convention in ("literal", "paper"):
        argv = ["capacity", "-K", "2", "--snr-db", "10", "--convention", convention]
        assert main(argv) == 1


def test_policy_configuration_errors():
    """Test that inconsistent policy options exit with code 1."""
    assert main(["policy", "joint_decoding", "-K", "3", "--snr-db", "0", *QUICK]) == 1
    assert main(["policy", "cdtdma_onoff", "-F", "2", "--snr-db", "0", *QUICK]) == 1
    assert main(["policy", "cdtdma_on", "-M", "2", "--snr-db", "0", *QUICK]) == 1


def test_policy(capsys):
    """Test that the policy command prints the optimum."""
    assert main(["policy", "cdtdma_onoff", "--snr-db", "0", *QUICK]) == 0
    output = capsys.readouterr().out
    assert output_value(output, "K M F L") == "2 1 3 1"
    assert 0.0 < float(output_value(output, "normalized")) < 1.0
    assert "verdict" not in output


def test_policy_simulate(capsys):
    """Test that the on/off optimum is confirmed by simulation."""
    argv = ["policy", "cdtdma_onoff", "--snr-db", "0", "--simulate", *QUICK]
    assert main([*argv, "--slots", "100000"]) == 0
    assert output_value(capsys.readouterr().out, "verdict") == "AGREE"


def test_sweep_csv(tmp_path):
    """Test the sweep output layout."""
    path = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", SWEEP_CONFIG, "-o", str(path), *QUICK]) == 0
    comments, rows = read_rows(path)
    assert comments[0] == f"# version={__version__}"
    assert "# seed=7" in comments
    assert "# settings=harq_mac.settings.quick" in comments
    assert list(rows[0]) == HEADER
    assert [(row["policy"], row["snr_db"]) for row in rows] == [
        ("cdtdma_onoff", "0"),
        ("cdtdma_onoff", "10"),
        ("multilevel_cdtdma", "0"),
        ("multilevel_cdtdma", "10"),
        ("static_tdma", "0"),
        ("static_tdma", "10"),
    ]
    assert [row["F"] for row in rows[2:4]] == ["7", "7"]
    assert all(row["sim_throughput"] == "" for row in rows)


def test_sweep_deterministic(tmp_path):
    """Test that two sweeps with the same config are byte-identical."""
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    for path in (first, second):
        argv = ["sweep", "--config", SWEEP_CONFIG, "-o", str(path), "--slots", "10000"]
        assert main([*argv, *QUICK]) == 0
    assert first.read_bytes() == second.read_bytes()
    _, rows = read_rows(first)
    assert all(float(row["sim_ci"]) > 0 for row in rows)


def test_sweep_unwritable(tmp_path):
    """Test that an unwritable output path exits with code 1."""
    path = tmp_path / "missing" / "sweep.csv"
    assert main(["sweep", "--config", SWEEP_CONFIG, "-o", str(path), *QUICK]) == 1


def test_sweep_config_from_file():
    """Test reading the sweep and per-policy sections."""
    config = SweepConfig.from_file(SWEEP_CONFIG, seed=11)
    assert config.seed == 11
    assert config.snr_grid == [0.0, 10.0]
    assert config.policy_options == {"multilevel_cdtdma": {"levels": 3}}
    levels = {entry.policy: entry.levels for entry in config.entries(settings)}
    assert levels == {"static_tdma": 1, "cdtdma_onoff": 1, "multilevel_cdtdma": 3}


def test_sweep_config_validation():
    """Test that bad sweep settings are refused."""
    with pytest.raises(ArgumentError):
        SweepConfig(snr_from=10.0, snr_to=0.0)
    with pytest.raises(ArgumentError):
        SweepConfig(snr_step=0.0)
    with pytest.raises(ArgumentError):
        SweepConfig(slots=500)
    with pytest.raises(ConfigurationError):
        SweepConfig(policies=("aloha",))


def test_sweep_skips_closed_forms(caplog):
    """Test that closed forms outside their K range are skipped."""
    config = SweepConfig(
        snr_from=0.0, snr_to=0.0, policies=(JOINT_DECODING, STATIC_TDMA), users=3
    )
    rows = run_sweep(config, settings)
    assert [row["policy"] for row in rows] == [STATIC_TDMA]
    assert "Skipping joint_decoding" in caplog.text


def test_point_seed():
    """Test that point seeds are stable and distinct."""
    assert point_seed(7, 0, 1) == point_seed(7, 0, 1)
    assert point_seed(7, 0, 1) != point_seed(7, 1, 0)
    assert point_seed(7, 0, 1) != point_seed(8, 0, 1)
    assert point_seed(7, 0, 1) == derive_seed(7, 0, 1)


def test_inr_seed_per_point():
    """Test that INR points searched under different seeds draw different fading."""
    spec = SystemSpec(users=2, attempts=2, pbar=1.0)
    default = create_policy(CDTDMA_INR, spec, 2, settings)
    first = create_policy(CDTDMA_INR, spec, 2, settings, seed=point_seed(7, 0, 1))
    second = create_policy(CDTDMA_INR, spec, 2, settings, seed=point_seed(7, 0, 2))
    assert first.seed == point_seed(7, 0, 1)
    assert default.seeds() == (
        settings.getint("OPTIMIZER_SEED"),
        settings.getint("SIM_SEED"),
    )
    assert len({default.seeds(), first.seeds(), second.seeds()}) == 3
    search, report = first.seeds()
    assert search != report


@pytest.mark.slow
def test_verify(capsys):
    """Test the verify command on the on/off and ALO policies."""
    argv = ["verify", "--policies", "cdtdma_onoff,cdtdma_alo", "--snr-db", "0"]
    assert main([*argv, "--slots", "200000", *QUICK]) == 0
    output = capsys.readouterr().out
    assert "alo_equals_onoff" in output
    assert "DISAGREE" not in output

import pytest
import yaml
from typer.testing import CliRunner

from pytessindex.__main__ import app

runner = CliRunner()

ITEMS_CSV = "id,f0,f1\n1,1.0,0.0\n2,0.0,1.0\n"
USERS_CSV = "id,f0,f1\n1,1.0,0.0\n2,-1.0,0.0\n"


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    """Runs every test in an empty directory, so no configuration is picked up."""
    monkeypatch.chdir(tmp_path)
    yield tmp_path


@pytest.fixture
def factor_files(workdir):
    (workdir / "items.csv").write_text(ITEMS_CSV, encoding="utf-8")
    (workdir / "users.csv").write_text(USERS_CSV, encoding="utf-8")
    return workdir


def query_lines(output: str) -> list:
    return [line for line in output.splitlines() if line.startswith("user=") or "\t" in line]


def test_cli_help_commands():
    "Checks is CLI commands presented in help output"

    result = runner.invoke(app, ["--help"])
    assert result.exit_code == 0
    for cmd in ["bench", "embed", "gen", "index", "init", "query", "verify", "version"]:
        assert cmd in result.stdout


def test_cli_version_commands():
    result = runner.invoke(app, ["version"])
    assert result.exit_code == 0
    assert "Version" in result.stdout


def test_cli_gen_is_deterministic(workdir):
    args = ["gen", "--k", "4", "--n-users", "3", "--n-items", "5", "--seed", "7"]
    assert runner.invoke(app, args).exit_code == 0
    assert runner.invoke(app, args + ["--users", "u2.csv", "--items", "i2.csv"]).exit_code == 0

    items = (workdir / "items.csv").read_text(encoding="utf-8").splitlines()
    assert items[0] == "id,f0,f1,f2,f3"
    assert len(items) == 6
    assert (workdir / "users.csv").read_bytes() == (workdir / "u2.csv").read_bytes()
    assert (workdir / "items.csv").read_bytes() == (workdir / "i2.csv").read_bytes()


@pytest.mark.parametrize("args", [["gen"], ["gen", "--k", "1"], ["gen", "--k", "3", "--config", "missing.yml"]])
def test_cli_gen_usage_errors(args):
    result = runner.invoke(app, args)
    assert result.exit_code == 2
    assert isinstance(result.exception, SystemExit)


def test_cli_embed(factor_files):
    result = runner.invoke(app, ["embed", "--input", "items.csv", "--scheme", "one_hot", "--output", "emb.tsv"])
    assert result.exit_code == 0
    assert "factors=2 p=6" in result.stdout
    assert (factor_files / "emb.tsv").exists()

    result = runner.invoke(app, ["embed", "--input", "items.csv", "--output", "counter.tsv"])
    assert result.exit_code == 0
    assert "p=11" in result.stdout


def test_cli_embed_missing_input():
    result = runner.invoke(app, ["embed", "--input", "missing.csv"])
    assert result.exit_code == 1


def test_cli_embed_malformed_input(workdir):
    (workdir / "items.csv").write_text("id,f0,f1\n1,1.0\n", encoding="utf-8")
    assert runner.invoke(app, ["embed", "--input", "items.csv"]).exit_code == 1


def test_cli_index_and_query(factor_files):
    result = runner.invoke(app, ["index", "--items", "items.csv", "--output", "items.snapshot"])
    assert result.exit_code == 0
    assert (factor_files / "items.snapshot").read_text(encoding="utf-8").startswith("tessindex v1 p=11 n=2\n")

    result = runner.invoke(app, ["query", "--users", "users.csv", "--index", "items.snapshot", "--kappa", "5"])
    assert result.exit_code == 0
    assert query_lines(result.stdout) == [
        "user=1 candidates=1 discard=0.5",
        "1\t1.0",
        "user=2 candidates=0 discard=1.0",
    ]

    result = runner.invoke(app, ["query", "--users", "users.csv", "--index", "items.snapshot", "--user-id", "1"])
    assert result.exit_code == 0
    assert query_lines(result.stdout) == ["user=1 candidates=1 discard=0.5", "1\t1.0"]


def test_cli_index_from_embeddings(factor_files):
    assert runner.invoke(app, ["embed", "--input", "items.csv", "--output", "emb.tsv"]).exit_code == 0
    assert runner.invoke(app, ["index", "--items", "items.csv", "--output", "a.snapshot"]).exit_code == 0
    args = ["index", "--items", "items.csv", "--embeddings", "emb.tsv", "--output", "b.snapshot"]
    assert runner.invoke(app, args).exit_code == 0
    assert (factor_files / "a.snapshot").read_bytes() == (factor_files / "b.snapshot").read_bytes()


def test_cli_query_missing_index(factor_files):
    result = runner.invoke(app, ["query", "--users", "users.csv", "--index", "missing.snapshot"])
    assert result.exit_code == 1


def test_cli_query_bad_kappa(factor_files):
    assert runner.invoke(app, ["index", "--items", "items.csv"]).exit_code == 0
    result = runner.invoke(app, ["query", "--users", "users.csv", "--kappa", "0"])
    assert result.exit_code == 2
    assert isinstance(result.exception, SystemExit)


def test_cli_bench(workdir):
    args = ["bench", "--method", "srp", "--method", "tessindex", "--n-users", "20", "--n-items", "60", "--k", "4"]
    args += ["--kappa", "3", "--seed", "5"]
    result = runner.invoke(app, args + ["--output-dir", "first"])
    assert result.exit_code == 0
    for name in ("srp", "tessindex"):
        for suffix in ("txt", "csv"):
            assert (workdir / "first" / f"report-{name}.{suffix}").exists()
    assert not (workdir / "first" / "report-superbit.txt").exists()

    report = (workdir / "first" / "report-tessindex.txt").read_text(encoding="utf-8")
    assert report.startswith("[params]\nmethod=tessindex\n")
    assert "threshold=1.0\n" in report
    assert "users=20\n" in report

    assert runner.invoke(app, args + ["--output-dir", "second", "--threads", "3"]).exit_code == 0
    for name in ("report-srp.txt", "report-srp.csv", "report-tessindex.txt", "report-tessindex.csv"):
        assert (workdir / "first" / name).read_bytes() == (workdir / "second" / name).read_bytes()


def test_cli_bench_from_files(factor_files):
    args = ["bench", "--method", "concomitant", "--users", "users.csv", "--items", "items.csv", "--kappa", "1"]
    result = runner.invoke(app, args + ["--arity", "4"])
    assert result.exit_code == 0
    assert "n_items=2\n" in (factor_files / "report-concomitant.txt").read_text(encoding="utf-8")


@pytest.mark.parametrize(
    "args",
    [
        ["bench", "--method", "minhash"],
        ["bench", "--users", "users.csv"],
        ["bench", "--method", "srp", "--bits", "0"],
        ["bench", "--method", "pca_tree", "--tables", "0"],
    ],
)
def test_cli_bench_usage_errors(args):
    result = runner.invoke(app, args)
    assert result.exit_code == 2
    assert isinstance(result.exception, SystemExit)


def test_cli_bench_checks_pca_depth_before_any_report(workdir):
    args = ["bench", "--method", "tessindex", "--method", "pca_tree", "--k", "4", "--n-users", "5", "--n-items", "20"]
    result = runner.invoke(app, args)
    assert result.exit_code == 2
    assert isinstance(result.exception, SystemExit)
    assert not (workdir / "report-tessindex.txt").exists()

    assert runner.invoke(app, args + ["--depth", "4"]).exit_code == 0
    assert (workdir / "report-pca_tree.txt").exists()


def test_cli_init_and_verify(workdir):
    result = runner.invoke(app, ["init", "--filename", "cfg.yml"])
    assert result.exit_code == 0
    assert "Generated config file: cfg.yml" in result.stdout

    result = runner.invoke(app, ["init", "--filename", "cfg.yml"])
    assert result.exit_code == 1

    result = runner.invoke(app, ["verify", "--filename", "cfg.yml"])
    assert result.exit_code == 0
    assert "Valid YAML file: cfg.yml" in result.stdout


def test_cli_verify_invalid(workdir):
    (workdir / "cfg.yml").write_text("encoding:\n  scheme: zigzag\n", encoding="utf-8")
    result = runner.invoke(app, ["verify", "--filename", "cfg.yml"])
    assert result.exit_code == 1
    assert "Invalid YAML file" in result.stdout

    assert runner.invoke(app, ["verify", "--filename", "missing.yml"]).exit_code == 1


def test_cli_config_supplies_defaults(workdir):
    assert runner.invoke(app, ["init"]).exit_code == 0
    path = workdir / "pytessindex.yml"
    data = yaml.safe_load(path.read_text(encoding="utf-8"))
    data["bench"]["n_users"] = 4
    data["bench"]["n_items"] = 6
    path.write_text(yaml.dump(data), encoding="utf-8")

    # picked up from the working directory
    assert runner.invoke(app, ["gen", "--k", "3"]).exit_code == 0
    assert len((workdir / "users.csv").read_text(encoding="utf-8").splitlines()) == 5
    assert len((workdir / "items.csv").read_text(encoding="utf-8").splitlines()) == 7

    # command line flags win over the file
    assert runner.invoke(app, ["gen", "--k", "3", "--n-items", "2"]).exit_code == 0
    assert len((workdir / "items.csv").read_text(encoding="utf-8").splitlines()) == 3


def test_cli_invalid_config_is_a_usage_error(workdir):
    (workdir / "bad.yml").write_text("query:\n  kappa: -3\n", encoding="utf-8")
    assert runner.invoke(app, ["gen", "--k", "3", "--config", "bad.yml"]).exit_code == 2

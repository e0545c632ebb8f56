import pytest
import yaml

from pytessindex.constants import METHODS
from pytessindex.exceptions import YAMLConfigExists, YAMLGenericException, YAMLValidationError
from pytessindex.yamlhandler import YAMLEmptyConfigHandler, YAMLHandler


@pytest.fixture
def config_file(tmp_path):
    filename = str(tmp_path / "pytessindex.yml")
    YAMLEmptyConfigHandler().generate_empty_config(filename=filename)
    return filename


def rewrite(filename: str, change) -> None:
    with open(filename, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)
    change(data)
    with open(filename, "w", encoding="utf-8") as f:
        yaml.dump(data, f)


def test_generated_config_is_valid(config_file):
    handler = YAMLHandler(filename=config_file)
    handler.load_data()
    handler.verify_config()
    assert handler.setting("encoding", "scheme") == "counter"
    assert handler.setting("bench", "threshold") == 1.0
    assert handler.setting("bench", "methods") == METHODS
    assert handler.setting("query", "kappa") == 10


def test_setting_defaults():
    handler = YAMLHandler(filename="unused.yml")
    assert handler.setting("query", "kappa", 7) == 7
    handler.data = {"query": None}
    assert handler.setting("query", "kappa", 7) == 7


def test_generate_refuses_existing_file(config_file):
    with pytest.raises(YAMLConfigExists):
        YAMLEmptyConfigHandler().generate_empty_config(filename=config_file)


@pytest.mark.parametrize(
    "change, message",
    [
        (lambda data: data.pop("query"), "'query' section is missing"),
        (lambda data: data["baselines"].pop("depth"), "Missing keys: depth"),
        (lambda data: data["baselines"].update(bits="eight"), "'baselines.bits' should be of type int"),
        (lambda data: data["baselines"].update(arity=1), "'baselines.arity' should be at least 2"),
        (lambda data: data["bench"].update(threshold=-0.5), "'bench.threshold' should be at least 0.0"),
        (lambda data: data["encoding"].update(scheme="zigzag"), "'encoding.scheme' should be one of"),
        (lambda data: data["bench"].update(methods=["srp", "minhash"]), "unknown methods ['minhash']"),
        (lambda data: data["query"].update(kappa=True), "'query.kappa' should be of type int"),
        (lambda data: data["encoding"].update(base=None), "cannot be None"),
    ],
)
def test_verify_config_errors(config_file, change, message):
    rewrite(config_file, change)
    handler = YAMLHandler(filename=config_file)
    handler.load_data()
    with pytest.raises(YAMLValidationError) as error:
        handler.verify_config()
    assert message in str(error.value)


def test_integer_thresholds_are_accepted(config_file):
    rewrite(config_file, lambda data: data["encoding"].update(threshold=1))
    handler = YAMLHandler(filename=config_file)
    handler.load_data()
    handler.verify_config()


def test_load_data_errors(tmp_path):
    broken = tmp_path / "broken.yml"
    broken.write_text("encoding: [unclosed\n", encoding="utf-8")
    with pytest.raises(YAMLGenericException):
        YAMLHandler(filename=str(broken)).load_data()

    listing = tmp_path / "listing.yml"
    listing.write_text("- a\n- b\n", encoding="utf-8")
    with pytest.raises(YAMLGenericException):
        YAMLHandler(filename=str(listing)).load_data()

import pytest
from layerkit.config import coerce_value, load_config

@pytest.mark.parametrize("text,expected", [
    ("yes", True),
    ("Off", False),
    ("8", 8),
    ("1e-4", 1e-4),
    ("8,16,32", [8, 16, 32]),
    ("1e-4, 1e-6", [1e-4, 1e-6]),
    ("gmres", "gmres"),
    ("  ilu0 ", "ilu0"),
])
def test_coerce_value(text, expected):
    assert coerce_value(text) == expected

def test_load_config(tmp_path):
    path = tmp_path / "study.cfg"
    path.write_text(
        "# quadratic study settings\n"
        "k = 2\n"
        "sigma = 3.0   # k + 1\n"
        "\n"
        "beta-x = 2\n"
        "eps = 1e-4,1e-6\n"
        "fallback_direct = yes\n"
    )
    config = load_config(path)
    assert config == {"k": 2, "sigma": 3.0, "beta_x": 2, "eps": [1e-4, 1e-6], "fallback_direct": True}

def test_load_config_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.cfg")

@pytest.mark.parametrize("content", ["k 2\n", "k = 1\nk = 2\n", " = 3\n"])
def test_load_config_rejects_bad_lines(tmp_path, content):
    path = tmp_path / "bad.cfg"
    path.write_text(content)
    with pytest.raises(ValueError):
        load_config(path)

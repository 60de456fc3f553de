import pytest

from groundsight_adapter.config import AdapterConfig, AdapterError, all_stub_config


class TestAdapterConfig:
    def test_defaults_disable_everything(self):
        config = AdapterConfig()
        assert config.enabled_endpoints() == {
            "answer": False,
            "summarize": False,
            "localize": False,
            "embed": False,
            "judge": False,
        }

    def test_enabled_when_model_named(self):
        config = AdapterConfig(answer_model="stub", embed_model="stub")
        enabled = config.enabled_endpoints()
        assert enabled["answer"] is True
        assert enabled["embed"] is True
        assert enabled["judge"] is False

    def test_model_for(self):
        config = AdapterConfig(localize_model="stub:x")
        assert config.model_for("localize") == "stub:x"
        assert config.model_for("judge") is None

    def test_unknown_endpoint_rejected(self):
        with pytest.raises(AdapterError):
            AdapterConfig().model_for("teleport")

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"max_concurrent": 0},
            {"port": 0},
            {"port": 70000},
            {"embed_dim": 0},
            {"request_timeout": 0.0},
            {"request_timeout": -1.0},
            {"device": ""},
        ],
    )
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ValueError):
            AdapterConfig(**kwargs)

    def test_timeout_none_allowed(self):
        assert AdapterConfig(request_timeout=None).request_timeout is None

    def test_all_stub_helper(self):
        config = all_stub_config(embed_dim=16)
        assert all(config.enabled_endpoints().values())
        assert config.embed_dim == 16

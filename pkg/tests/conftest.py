import pytest

from groundsight.backends import ScriptedMock


@pytest.fixture
def mock_factory():
    """Build a ScriptedMock from a {(op, image_id, discriminator): response} table."""

    def make(table=None, defaults=None) -> ScriptedMock:
        return ScriptedMock(table=table or {}, defaults=defaults or {})

    return make

"""REST identification service."""
import pytest
from fastapi.testclient import TestClient

from app.api.v1 import identify as identify_api
from app.config import settings
from app.main import app
from app.services.classifier import build_identifier, store_identifier
from app.services.csi_io import store_csv
from app.services.harness import build_feature_table


@pytest.fixture
def client():
    identify_api._load_model.cache_clear()
    yield TestClient(app)
    identify_api._load_model.cache_clear()


@pytest.fixture
def model_path(clean_pair, pipeline_config, tmp_path, monkeypatch):
    table = build_feature_table(clean_pair.records, pipeline_config)
    path = tmp_path / "model.json"
    store_identifier(build_identifier(table.features, table.subjects), path)
    monkeypatch.setattr(settings, "MODEL_PATH", str(path))
    return path


@pytest.fixture
def recording(clean_pair, tmp_path):
    path = tmp_path / "recording.csv"
    store_csv(clean_pair.records[-1].series, path)
    return path


def test_health(client):
    response = client.get("/api/v1/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_model_summary(client, model_path):
    response = client.get("/api/v1/model")
    assert response.status_code == 200
    body = response.json()
    assert body["n_classes"] == 2
    assert body["n_features"] == 39
    assert 0.0 < body["threshold"] <= 1.0


def test_identify_upload(client, model_path, recording):
    with open(recording, "rb") as handle:
        response = client.post("/api/v1/identify", files={"file": ("recording.csv", handle, "text/csv")})
    assert response.status_code == 200
    body = response.json()
    assert set(body) == {"decision", "identity", "confidence", "threshold"}
    assert body["decision"] in ("accept", "reject")
    if body["decision"] == "accept":
        assert body["identity"] == 2
    else:
        assert body["identity"] is None


def test_malformed_upload(client, model_path):
    response = client.post("/api/v1/identify", files={"file": ("bad.csv", b"not a csi file\n", "text/csv")})
    assert response.status_code == 422


def test_no_model_configured(client, monkeypatch, recording):
    monkeypatch.setattr(settings, "MODEL_PATH", None)
    with open(recording, "rb") as handle:
        response = client.post("/api/v1/identify", files={"file": ("recording.csv", handle, "text/csv")})
    assert response.status_code == 503
    assert client.get("/api/v1/model").status_code == 503

import json
import logging
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ooc_detect.detections import (
    DEFAULT_MAPPING,
    DetectionCache,
    DetectionRecord,
    EndpointConfig,
    RawLabel,
    VendorMapping,
    canonicalize,
    fetch_detections,
    map_response,
    parse_fixture,
    write_fixture,
)
from ooc_detect.exceptions import MappingError, ParseError, RemoteError, ValidationError

from conftest import records


def test_canonicalize_table2_labels():
    rec = canonicalize([RawLabel("Finger", 61.10), RawLabel("Tie", 55.3)], "a")
    assert rec.labels == {"finger": 0.611, "tie": 0.553}


def test_canonicalize_empty():
    assert canonicalize([], "x") == DetectionRecord("x", {})


def test_duplicate_labels_keep_max():
    rec = canonicalize([("Face", 99.6), ("face", 50.0)], "x")
    assert rec.labels == {"face": 0.996}


def test_names_are_trimmed_and_collapsed():
    rec = canonicalize([("  Human   Hand ", 40), ("HUMAN hand", 45)], "x")
    assert rec.labels == {"human hand": 0.45}


@pytest.mark.parametrize("bad", [150, -0.5, float("nan"), float("inf")])
def test_out_of_range_confidence_names_label(bad):
    with pytest.raises(ValidationError, match="Finger"):
        canonicalize([("Finger", bad)], "x")


def test_blank_name_rejected():
    with pytest.raises(ValidationError):
        RawLabel("   ", 10)


def test_parse_fixture_table3():
    data = b"""[{"image_id": "b", "labels": [
        {"name": "Human", "confidence": 99.5}, {"name": "Person", "confidence": 99.5},
        {"name": "Face", "confidence": 99.5}, {"name": "Clothing", "confidence": 74.1},
        {"name": "Finger", "confidence": 59}, {"name": "Wood", "confidence": 82.4}]}]"""
    (rec,) = parse_fixture(data)
    assert rec.labels == {
        "clothing": 0.741, "face": 0.995, "finger": 0.59,
        "human": 0.995, "person": 0.995, "wood": 0.824,
    }


def test_parse_empty_fixture():
    assert parse_fixture(b"[]") == []


def test_parse_rejects_confidence_150_with_index():
    data = b'[{"image_id": "a", "labels": []}, {"image_id": "b", "labels": [{"name": "x", "confidence": 150}]}]'
    with pytest.raises(ValidationError, match="entry 1"):
        parse_fixture(data)


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as info:
        parse_fixture(b'[\n  {"image_id": "a", "labels": [}\n]')
    assert info.value.line == 2
    assert info.value.pos is not None


def test_parse_error_on_bad_utf8():
    with pytest.raises(ParseError) as info:
        parse_fixture(b'["\xff"]')
    assert info.value.pos == 2


@pytest.mark.parametrize("doc", [b'{"a": 1}', b'[1]', b'[{"labels": []}]', b'[{"image_id": "a"}]',
                                 b'[{"image_id": "a", "labels": [{"name": "x"}]}]'])
def test_schema_violations(doc):
    with pytest.raises(ValidationError):
        parse_fixture(doc)


def test_order_preserved():
    recs = [DetectionRecord(i, {}) for i in "zyx"]
    assert [r.image_id for r in parse_fixture(write_fixture(recs))] == ["z", "y", "x"]


def test_fixture_keeps_exact_percentages(table2):
    text = write_fixture([table2]).decode()
    assert '"confidence": 61.1' in text and '"confidence": 55.3' in text


@settings(max_examples=1000, deadline=None)
@given(st.lists(records(), max_size=4))
def test_fixture_round_trip(recs):
    assert parse_fixture(write_fixture(recs)) == recs


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.tuples(st.text(min_size=1).filter(str.strip),
                          st.floats(0, 100, allow_nan=False)), max_size=6))
def test_confidences_in_unit_interval(raw):
    rec = canonicalize(raw, "x")
    assert all(0.0 <= c <= 1.0 for c in rec.labels.values())


@settings(max_examples=500, deadline=None)
@given(records())
def test_canonicalize_idempotent(rec):
    assert canonicalize(rec.raw_labels(), rec.image_id) == rec


# -- vendor mapping ----------------------------------------------------------


def test_default_mapping_table4_column_a():
    rec = map_response({"Labels": [{"Name": "Finger", "Confidence": 56.4}]}, DEFAULT_MAPPING, "a")
    assert rec.labels == {"finger": 0.564}


def test_empty_labels():
    assert map_response(b'{"Labels": []}', DEFAULT_MAPPING, "a").labels == {}


def test_missing_field_path():
    mapping = VendorMapping(name_field="Name")
    with pytest.raises(MappingError) as info:
        map_response({"Labels": [{"Title": "Finger", "Confidence": 56.4}]}, mapping, "a")
    assert info.value.path == "Labels[0].Name"


def test_nested_path_and_scale():
    mapping = VendorMapping("result.items", "label", "score", 1.0)
    body = {"result": {"items": [{"label": "Finger", "score": 0.915}]}}
    assert map_response(body, mapping, "e").labels == {"finger": 0.915}


def test_missing_labels_path():
    with pytest.raises(MappingError, match="result"):
        map_response({"Labels": []}, VendorMapping("result.items"), "a")


def test_non_json_body():
    with pytest.raises(MappingError):
        map_response(b"<html>", DEFAULT_MAPPING, "a")


def test_mapping_rejects_nonpositive_scale():
    with pytest.raises(ValidationError):
        VendorMapping(confidence_scale=0)


def test_mapping_file(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"labels_path": "objs", "name_field": "n",
                                "confidence_field": "c", "confidence_scale": 1}))
    assert VendorMapping.load(path) == VendorMapping("objs", "n", "c", 1)


# -- remote ------------------------------------------------------------------

BODY = {"Labels": [{"Name": "Finger", "Confidence": 91.5}, {"Name": "Face", "Confidence": 99.9}]}


def test_fetch_sends_ref_and_credential(fake_vendor, monkeypatch, caplog):
    monkeypatch.setenv("OOC_DETECTOR_API_KEY", "s3cret")
    caplog.set_level(logging.DEBUG)
    with fake_vendor(BODY) as vendor:
        rec = fetch_detections(EndpointConfig(vendor.url), "img/e.png")
    assert rec == DetectionRecord("img/e.png", {"face": 0.999, "finger": 0.915})
    headers, payload = vendor.requests[0]
    assert headers["Authorization"] == "Bearer s3cret"
    assert json.loads(payload) == {"image": "img/e.png"}
    assert "s3cret" not in caplog.text


def test_fetch_upload_mode(fake_vendor, tmp_path):
    img = tmp_path / "face.png"
    img.write_bytes(b"\x89PNGfake")
    with fake_vendor(BODY) as vendor:
        fetch_detections(EndpointConfig(vendor.url, mode="upload"), str(img))
    assert b"\x89PNGfake" in vendor.requests[0][1]


def test_cache_means_one_request(fake_vendor, tmp_path):
    cache = DetectionCache(tmp_path / "cache")
    with fake_vendor(BODY) as vendor:
        endpoint = EndpointConfig(vendor.url)
        first = fetch_detections(endpoint, "a.png", cache=cache)
        second = fetch_detections(endpoint, "a.png", cache=cache)
    assert first == second
    assert len(vendor.requests) == 1


def test_cache_serves_offline(fake_vendor, tmp_path):
    cache = DetectionCache(tmp_path)
    with fake_vendor(BODY) as vendor:
        url = vendor.url
        fetch_detections(EndpointConfig(url), "a.png", cache=cache)
    # server is gone; the cached fixture answers
    assert fetch_detections(EndpointConfig(url), "a.png", cache=cache).labels["finger"] == 0.915


def test_concurrent_fetches_share_one_request(fake_vendor, tmp_path):
    cache = DetectionCache(tmp_path)
    results = []
    with fake_vendor(BODY) as vendor:
        endpoint = EndpointConfig(vendor.url)
        threads = [threading.Thread(target=lambda: results.append(
            fetch_detections(endpoint, "same.png", cache=cache))) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    assert len(vendor.requests) == 1
    assert len(results) == 8 and all(r == results[0] for r in results)


@pytest.mark.parametrize("status,retryable", [(404, False), (503, True), (429, True)])
def test_non_2xx(fake_vendor, status, retryable):
    with fake_vendor({"error": "x"}, status=status) as vendor:
        with pytest.raises(RemoteError) as info:
            fetch_detections(EndpointConfig(vendor.url), "a.png")
    assert info.value.status == status
    assert info.value.retryable is retryable


def test_transport_failure_is_retryable(fake_vendor):
    with fake_vendor(BODY) as vendor:
        url = vendor.url
    with pytest.raises(RemoteError) as info:
        fetch_detections(EndpointConfig(url, timeout=2), "a.png")
    assert info.value.retryable


def test_unexpected_shape_from_server(fake_vendor):
    with fake_vendor({"labels": []}) as vendor:
        with pytest.raises(MappingError, match="Labels"):
            fetch_detections(EndpointConfig(vendor.url), "a.png")


def test_endpoint_config_validation():
    with pytest.raises(ValidationError):
        EndpointConfig("http://x", mode="carrier-pigeon")

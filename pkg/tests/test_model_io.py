import asyncio
import base64
import json

import httpx
import numpy as np
import pytest

from a3kit.annotation import SemanticLabel, Triad
from a3kit.dataset_builder import SubTask
from a3kit.errors import AnswerParseError, ArityError, TransportError
from a3kit.model_io import (
    EpisodeContext,
    PredictionSource,
    RemoteVLMClient,
    answer_for,
    encode_image,
    parse_triad_answer,
    perturb_triad,
    predict,
)

BOX = "[(0.10,0.20,0.30), (0.20,0.20,0.30), (0.20,0.30,0.30), (0.10,0.30,0.30), (0.10,0.20,0.40), (0.20,0.20,0.40), (0.20,0.30,0.40), (0.10,0.30,0.40)]"  # noqa: E501
AXIS = "[(0.15,0.20,0.35), (0.15,0.30,0.35)]"


@pytest.fixture
def triad() -> Triad:
    rng = np.random.default_rng(0)
    return Triad(
        box_norm=rng.uniform(0.2, 0.8, size=(8, 3)),
        axis_norm=rng.uniform(0.2, 0.8, size=(2, 3)),
        label=SemanticLabel("prismatic", "drawer", ("slide_out",)),
        link="drawer_top",
        visibility=0.6,
    )


def test_parse_each_task() -> None:
    detection = parse_triad_answer(f"There are two parts: door: {BOX}; drawer: {BOX}", "Detection")
    assert len(detection.boxes) == 2

    rec = parse_triad_answer(f"Sure! {BOX}", SubTask.REC_LINK)
    assert rec.boxes[0].shape == (8, 3)
    assert rec.boxes[0][0] == pytest.approx([0.1, 0.2, 0.3])

    joint = parse_triad_answer(f"Joint type: Continuous, axis: {AXIS}", SubTask.REG_JOINT)
    assert joint.joint_kind == "revolute"
    assert joint.axis.shape == (2, 3)

    action = parse_triad_answer(f"Action type: statuscomplete, bounding box: {BOX}", "RECAction")
    assert action.actions == ("StatusComplete",)


def test_parse_picks_the_list_with_the_right_arity() -> None:
    joint = parse_triad_answer(f"box {BOX} then prismatic axis {AXIS}", SubTask.REG_JOINT)
    assert joint.joint_kind == "prismatic"
    assert joint.axis[0] == pytest.approx([0.15, 0.2, 0.35])


def test_parse_errors() -> None:
    with pytest.raises(AnswerParseError):
        parse_triad_answer("I cannot see a drawer", SubTask.REC_LINK)
    with pytest.raises(ArityError):
        parse_triad_answer(f"axis {AXIS}", SubTask.REC_LINK)
    with pytest.raises(AnswerParseError):
        parse_triad_answer(f"axis {AXIS}", SubTask.REG_JOINT)
    with pytest.raises(AnswerParseError):
        parse_triad_answer(f"Action type: jump, bounding box: {BOX}", SubTask.REC_ACTION)


def test_ground_truth_answers_parse_back(triad) -> None:
    for task in SubTask:
        parsed = parse_triad_answer(answer_for(task, triad), task)
        if task is SubTask.REG_JOINT:
            assert np.abs(parsed.axis - triad.axis_norm).max() <= 0.005 + 1e-12
            assert parsed.joint_kind == "prismatic"
        else:
            assert np.abs(parsed.boxes[0] - triad.box_norm).max() <= 0.005 + 1e-12
    assert parse_triad_answer(answer_for(SubTask.REC_ACTION, triad), "RECAction").actions == (
        "slide_out",
    )


def test_perturbation_is_seeded_and_clamped(triad) -> None:
    a = perturb_triad(triad, 0.05, np.random.default_rng(1))
    b = perturb_triad(triad, 0.05, np.random.default_rng(1))
    assert np.array_equal(a.box_norm, b.box_norm)
    assert not np.array_equal(a.box_norm, triad.box_norm)
    wild = perturb_triad(triad, 10.0, np.random.default_rng(1))
    assert ((wild.box_norm >= 0.0) & (wild.box_norm <= 1.0)).all()
    same = perturb_triad(triad, 0.0, np.random.default_rng(1))
    assert np.array_equal(same.box_norm, triad.box_norm)


def test_predict_sources(triad) -> None:
    context = EpisodeContext("images/x.png", "Where is the drawer?", SubTask.REC_LINK, triad, "x:0")
    assert predict(PredictionSource.ground_truth(), context) == answer_for(SubTask.REC_LINK, triad)
    noisy = PredictionSource.perturbed(0.05, seed=3)
    assert predict(noisy, context) == predict(noisy, context)
    assert predict(noisy, context) != predict(PredictionSource.perturbed(0.05, seed=4), context)


def test_encode_image(tmp_path) -> None:
    image = tmp_path / "view.png"
    image.write_bytes(b"\x89PNG fake")
    assert base64.b64decode(encode_image(str(image))) == b"\x89PNG fake"
    assert encode_image("images/missing.png") == "images/missing.png"


def test_remote_client_round_trip() -> None:
    seen = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(json.loads(request.content))
        return httpx.Response(200, json={"text": f"answer to {seen[-1]['prompt']}"})

    client = httpx.Client(transport=httpx.MockTransport(handler))
    remote = RemoteVLMClient("http://vlm/v1/predict", client=client)
    assert remote.predict("images/a.png", "hello") == "answer to hello"
    assert seen == [{"image": "images/a.png", "prompt": "hello"}]


@pytest.mark.parametrize(
    "response",
    [httpx.Response(500, text="boom"), httpx.Response(200, json={"answer": "wrong key"})],
)
def test_remote_client_errors_become_transport_errors(response) -> None:
    client = httpx.Client(transport=httpx.MockTransport(lambda request: response))
    with pytest.raises(TransportError):
        RemoteVLMClient("http://vlm/v1/predict", client=client).predict("a.png", "p")


def test_predict_many_caps_in_flight_and_keeps_order() -> None:
    active = 0
    peak = 0

    async def handler(request: httpx.Request) -> httpx.Response:
        nonlocal active, peak
        active += 1
        peak = max(peak, active)
        await asyncio.sleep(0.01)
        active -= 1
        prompt = json.loads(request.content)["prompt"]
        if prompt == "p3":
            return httpx.Response(503)
        return httpx.Response(200, json={"text": prompt.upper()})

    async_client = httpx.AsyncClient(transport=httpx.MockTransport(handler))
    remote = RemoteVLMClient("http://vlm/v1/predict", max_in_flight=2, async_client=async_client)
    requests = [("img.png", f"p{i}") for i in range(6)]
    results = asyncio.run(remote.predict_many(requests))

    assert results[:3] == ["P0", "P1", "P2"]
    assert isinstance(results[3], TransportError)
    assert results[4:] == ["P4", "P5"]
    assert peak <= 2

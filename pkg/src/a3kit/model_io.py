"""Answer parsing and prediction sources (ground truth, perturbed ground truth, remote VLM)."""

import asyncio
import base64
import dataclasses
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import httpx
import numpy as np
from pydantic import BaseModel, Field, ValidationError

from .annotation import Triad
from .config import REMOTE_MAX_IN_FLIGHT, REMOTE_TIMEOUT, VLM_ENDPOINT
from .dataset_builder import SubTask, action_answer, detection_answer, format_triad_text, joint_answer
from .errors import AnswerParseError, ArityError, TransportError
from .grammar import GRAMMAR, AnswerGrammar
from .logging_config import configure_logging
from .seeding import rng_for
from .skills import SKILL_LIBRARY

# Logging Configuration
logger = configure_logging()

TASK_ARITY = {
    SubTask.DETECTION: 8,
    SubTask.REC_LINK: 8,
    SubTask.REG_JOINT: 2,
    SubTask.REC_ACTION: 8,
}

JOINT_RE = re.compile(r"\b(prismatic|revolute|continuous)\b", re.IGNORECASE)
ACTION_RE = re.compile(
    r"\b(" + "|".join(re.escape(a) for a in sorted(SKILL_LIBRARY, key=len, reverse=True)) + r")\b",
    re.IGNORECASE,
)
CANONICAL_ACTIONS = {a.lower(): a for a in SKILL_LIBRARY}


@dataclass(frozen=True, eq=False)
class ParsedAnswer:
    task: SubTask
    boxes: tuple[np.ndarray, ...] = ()
    axis: np.ndarray | None = None
    joint_kind: str | None = None
    actions: tuple[str, ...] = ()


def parse_triad_answer(text: str, task: SubTask | str, grammar: AnswerGrammar = GRAMMAR) -> ParsedAnswer:
    """Extract the coordinate lists and keywords a sub-task answer carries.

    Surrounding prose is ignored. Detection keeps every 8-tuple list; the other tasks
    keep the first list of their arity.
    """
    task = SubTask(task)
    blocks = grammar.find_blocks(text)
    if not blocks:
        raise AnswerParseError("Answer contains no well-formed coordinate list")
    arity = TASK_ARITY[task]
    matching = [b for b in blocks if len(b) == arity]
    if not matching:
        raise ArityError(f"{task} answer needs a list of {arity} tuples, found {[len(b) for b in blocks]}")

    if task is SubTask.DETECTION:
        return ParsedAnswer(task, boxes=tuple(matching))
    if task is SubTask.REC_LINK:
        return ParsedAnswer(task, boxes=(matching[0],))
    if task is SubTask.REG_JOINT:
        keyword = JOINT_RE.search(text)
        if keyword is None:
            raise AnswerParseError("Joint answer names no joint type")
        kind = keyword.group(1).lower()
        return ParsedAnswer(
            task, axis=matching[0], joint_kind="prismatic" if kind == "prismatic" else "revolute"
        )
    actions = tuple(CANONICAL_ACTIONS[m.lower()] for m in ACTION_RE.findall(text))
    if not actions:
        raise AnswerParseError("Action answer names no skill from the library")
    return ParsedAnswer(task, boxes=(matching[0],), actions=actions)


class PredictionSource(BaseModel):
    kind: Literal["ground_truth", "perturbed", "remote"] = "ground_truth"
    sigma: float = Field(default=0.0, ge=0.0)
    seed: int = 0
    endpoint: str | None = None
    timeout: float = REMOTE_TIMEOUT

    @classmethod
    def ground_truth(cls) -> "PredictionSource":
        return cls(kind="ground_truth")

    @classmethod
    def perturbed(cls, sigma: float, seed: int = 0) -> "PredictionSource":
        return cls(kind="perturbed", sigma=sigma, seed=seed)

    @classmethod
    def remote(cls, endpoint: str = VLM_ENDPOINT, timeout: float = REMOTE_TIMEOUT) -> "PredictionSource":
        return cls(kind="remote", endpoint=endpoint, timeout=timeout)


@dataclass(frozen=True, eq=False)
class EpisodeContext:
    image_ref: str
    prompt: str
    task: SubTask
    triad: Triad
    key: str = ""  # stable per-episode id; seeds perturbation noise


def answer_for(task: SubTask, triad: Triad) -> str:
    """Ground-truth answer text of a sub-task about a single triad."""
    task = SubTask(task)
    if task is SubTask.DETECTION:
        return detection_answer([triad])
    if task is SubTask.REC_LINK:
        return format_triad_text(triad)[0]
    if task is SubTask.REG_JOINT:
        return joint_answer(triad)
    action = triad.label.actions[0] if triad.label.actions else "StatusComplete"
    return action_answer(action, triad)


def perturb_triad(triad: Triad, sigma: float, rng: np.random.Generator) -> Triad:
    """Zero-mean Gaussian noise per normalized coordinate, clamped to [0, 1].

    Box noise is drawn before axis noise so one seed gives the same unit draws at every sigma.
    """
    box_noise = rng.standard_normal(triad.box_norm.shape)
    axis_noise = rng.standard_normal(triad.axis_norm.shape)
    return dataclasses.replace(
        triad,
        box_norm=np.clip(triad.box_norm + sigma * box_noise, 0.0, 1.0),
        axis_norm=np.clip(triad.axis_norm + sigma * axis_noise, 0.0, 1.0),
    )


class PredictRequest(BaseModel):
    image: str
    prompt: str


class PredictResponse(BaseModel):
    text: str


def encode_image(image_ref: str) -> str:
    """Base64 of the referenced file when it exists, else the reference itself."""
    path = Path(image_ref)
    if image_ref and path.is_file():
        return base64.b64encode(path.read_bytes()).decode("ascii")
    return image_ref


class RemoteVLMClient:
    """Client for a VLM server speaking POST {image, prompt} -> {text}."""

    def __init__(
        self,
        endpoint: str = VLM_ENDPOINT,
        timeout: float = REMOTE_TIMEOUT,
        max_in_flight: int = REMOTE_MAX_IN_FLIGHT,
        client: httpx.Client | None = None,
        async_client: httpx.AsyncClient | None = None,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.max_in_flight = max_in_flight
        self._client = client
        self._async_client = async_client

    def _payload(self, image_ref: str, prompt: str) -> dict:
        return PredictRequest(image=encode_image(image_ref), prompt=prompt).model_dump()

    @staticmethod
    def _parse(response: httpx.Response) -> str:
        response.raise_for_status()
        return PredictResponse.model_validate(response.json()).text

    def predict(self, image_ref: str, prompt: str) -> str:
        client = self._client or httpx.Client(timeout=self.timeout)
        try:
            return self._parse(client.post(self.endpoint, json=self._payload(image_ref, prompt)))
        except (httpx.RequestError, httpx.HTTPStatusError) as e:
            raise TransportError(f"VLM request failed: {e}") from e
        except (ValueError, ValidationError) as e:
            raise TransportError(f"VLM response violates the contract: {e}") from e
        finally:
            if self._client is None:
                client.close()

    async def predict_many(self, requests: list[tuple[str, str]]) -> list[str | TransportError]:
        """Concurrent predictions with at most `max_in_flight` requests open; order preserved."""
        semaphore = asyncio.Semaphore(self.max_in_flight)
        client = self._async_client or httpx.AsyncClient(timeout=self.timeout)

        async def one(image_ref: str, prompt: str) -> str | TransportError:
            async with semaphore:
                try:
                    response = await client.post(self.endpoint, json=self._payload(image_ref, prompt))
                    return self._parse(response)
                except (httpx.RequestError, httpx.HTTPStatusError, ValueError, ValidationError) as e:
                    logger.warning("VLM request failed", prompt=prompt, error=str(e))
                    return TransportError(f"VLM request failed: {e}")

        try:
            return await asyncio.gather(*(one(image, prompt) for image, prompt in requests))
        finally:
            if self._async_client is None:
                await client.aclose()


def predict(source: PredictionSource, context: EpisodeContext) -> str:
    if source.kind == "ground_truth":
        return answer_for(context.task, context.triad)
    if source.kind == "perturbed":
        rng = rng_for(source.seed, context.key, context.task.value)
        return answer_for(context.task, perturb_triad(context.triad, source.sigma, rng))
    client = RemoteVLMClient(source.endpoint or VLM_ENDPOINT, timeout=source.timeout)
    return client.predict(context.image_ref, context.prompt)

"""Oracle FastAPI server - replays built dataset answers over the remote VLM contract and selects skills by rule."""

import os
from contextlib import asynccontextmanager
from pathlib import Path

import uvicorn
from fastapi import FastAPI, HTTPException
from pydantic import ValidationError

from .config import ORACLE_HOST, ORACLE_PORT
from .dataset_builder import InstructionSample, instruction_for
from .errors import ConfigError
from .logging_config import configure_logging
from .model_io import PredictRequest, PredictResponse
from .skills import SkillRequest, SkillResponse, SkillRuleTable, SkillTask, select_actions

# Logging Configuration
logger = configure_logging()

SAMPLES_ENV = "A3KIT_ORACLE_SAMPLES"  # samples.jsonl written by `a3kit build-dataset`
RULES_ENV = "A3KIT_ORACLE_RULES"  # optional replacement skill rule table


def load_answers(path: str | Path) -> dict[tuple[str, str], str]:
    """Index a samples JSONL by (image, prompt); the first answer of a duplicate pair wins."""
    answers = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"Cannot read samples file '{path}': {e}") from e
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            sample = InstructionSample.model_validate_json(line)
        except ValidationError as e:
            raise ConfigError(f"{path}:{number} is not an instruction sample: {e}") from e
        answers.setdefault((sample.image, sample.prompt), sample.answer)
    return answers


def create_app(
    samples_path: str | Path | None = None, rules: SkillRuleTable | None = None
) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        path = samples_path or os.environ.get(SAMPLES_ENV)
        app.state.answers = load_answers(path) if path else {}
        rules_path = os.environ.get(RULES_ENV)
        app.state.rules = rules or (
            SkillRuleTable.load(rules_path) if rules_path else SkillRuleTable.default()
        )
        logger.info("Oracle ready", answers=len(app.state.answers), rules=len(app.state.rules.rules))
        yield

    app = FastAPI(lifespan=lifespan)

    @app.post("/v1/predict", response_model=PredictResponse)
    async def predict(request: PredictRequest) -> PredictResponse:
        answer = app.state.answers.get((request.image, request.prompt))
        if answer is None:
            logger.info("No recorded answer", image=request.image, prompt=request.prompt)
            raise HTTPException(status_code=404, detail="No recorded answer for this image and prompt")
        return PredictResponse(text=answer)

    @app.post("/v1/skills", response_model=SkillResponse)
    async def skills(request: SkillRequest) -> SkillResponse:
        tasks = []
        for link in request.links:
            try:
                actions = select_actions(
                    app.state.rules, request.category, link.name, link.joint, link.state
                )
            except ValueError:
                # joint types outside URDF vocabulary (e.g. "static") get no actions
                continue
            if actions:
                tasks.append(SkillTask(task=instruction_for(actions[0], link.name), actions=actions))
        return SkillResponse(tasks=tasks)

    return app


app = create_app()


def main():
    uvicorn.run(app, host=ORACLE_HOST, port=ORACLE_PORT, log_config=None, log_level="info")


if __name__ == "__main__":
    main()

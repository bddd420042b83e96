"""HTTP service for interactive infilling with session persistence.

Sessions live one directory each under ``<data_dir>/sessions``: the
uploaded MIDI, a JSON index of the version graph, and one token text
file per version. Uploads become version 0; every infill stores a new
version whose unmasked tokens are byte-identical to its parent's.
Control overrides are applied by substituting tokens in the encoder
input before sampling, and the response reports whether the regenerated
music actually matches each requested bin within a tolerance of one.

All state reloads from disk on startup, so restarts preserve sessions.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from pydantic import BaseModel, Field

from .codec import TokenSequence, decode_tokens, encode_song, parse_structure, validate_grammar
from .config import AppConfig
from .controls import Calibration, DEFAULT_CALIBRATION, compute_control_set
from .masking import mask_cells
from .midi_io import parse_midi, quantize, write_midi
from .model import ModelConfig, Seq2SeqTransformer, load_checkpoint
from .samples import two_bar_demo_song
from .sampler import sample_infill

__all__ = ["SessionStore", "create_app", "apply_control_overrides"]

TRACK_CONTROL_KEYS = ("density", "occupation", "polyphony")
BAR_CONTROL_KEYS = ("strain", "diameter")
MATCH_TOLERANCE = 1


class RegionModel(BaseModel):
    bar: int
    track: int


class OverridesModel(BaseModel):
    tracks: dict[int, dict[str, int]] = Field(default_factory=dict)
    bars: dict[int, dict[str, int]] = Field(default_factory=dict)


class InfillRequestModel(BaseModel):
    regions: list[RegionModel]
    control_overrides: OverridesModel = Field(default_factory=OverridesModel)
    temperature: float = 1.0
    seed: int = 0
    parent_version: int | None = None


def apply_control_overrides(
    seq: TokenSequence,
    track_overrides: dict[int, dict[str, int]],
    bar_overrides: dict[int, dict[str, int]],
) -> TokenSequence:
    """Substitute control tokens in a with-controls sequence.

    Track overrides replace the d_/o_/y_ token of the given track;
    bar overrides replace the s_/a_ tokens after the given bar token.
    Raises ValueError for unknown keys or out-of-range indices/bins.
    """
    if not seq.with_controls:
        raise ValueError("control overrides need a with-controls sequence")
    structure = parse_structure(seq)
    tokens = list(seq.tokens)
    track_count = structure.track_count
    # header layout: timesig tempo key d*T o*T y*T i*T
    offsets = {"density": 3, "occupation": 3 + track_count, "polyphony": 3 + 2 * track_count}
    prefixes = {"density": "d", "occupation": "o", "polyphony": "y"}
    for track, controls in track_overrides.items():
        if not 0 <= track < track_count:
            raise ValueError(f"track {track} outside [0,{track_count - 1}]")
        for key, value in controls.items():
            if key not in TRACK_CONTROL_KEYS:
                raise ValueError(f"unknown track control {key!r}")
            if not 0 <= value <= 9:
                raise ValueError(f"{key} bin {value} outside [0,9]")
            tokens[offsets[key] + track] = f"{prefixes[key]}_{value}"
    for bar, controls in bar_overrides.items():
        if not 0 <= bar < len(structure.bars):
            raise ValueError(f"bar {bar} outside [0,{len(structure.bars) - 1}]")
        bar_token = structure.bars[bar].bar_token
        for key, value in controls.items():
            if key not in BAR_CONTROL_KEYS:
                raise ValueError(f"unknown bar control {key!r}")
            if not 0 <= value <= 11:
                raise ValueError(f"{key} bin {value} outside [0,11]")
            position = bar_token + (1 if key == "strain" else 2)
            tokens[position] = f"{'s' if key == 'strain' else 'a'}_{value}"
    return TokenSequence(tuple(tokens), True)


@dataclass
class Session:
    song_id: str
    directory: Path
    index: dict
    lock: threading.Lock = field(default_factory=threading.Lock)

    def version_tokens(self, version_id: int) -> TokenSequence:
        text = (self.directory / f"v{version_id}.tokens").read_text().strip()
        return TokenSequence.from_text(text)


class SessionStore:
    """Directory-backed session persistence; one subdirectory per song."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir) / "sessions"
        self.root.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._store_lock = threading.Lock()
        for index_path in sorted(self.root.glob("*/index.json")):
            index = json.loads(index_path.read_text())
            session = Session(index["song_id"], index_path.parent, index)
            self._sessions[session.song_id] = session

    def __len__(self) -> int:
        return len(self._sessions)

    def get(self, song_id: str) -> Session:
        try:
            return self._sessions[song_id]
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown song {song_id!r}") from None

    def create(self, midi_bytes: bytes, tokens: TokenSequence, metadata: dict) -> Session:
        song_id = uuid.uuid4().hex[:12]
        directory = self.root / song_id
        directory.mkdir()
        (directory / "original.mid").write_bytes(midi_bytes)
        index = {
            "song_id": song_id,
            "created": _now(),
            **metadata,
            "versions": [
                {
                    "id": 0,
                    "parent": None,
                    "request": None,
                    "controls": metadata["controls"],
                    "matched": None,
                    "created": _now(),
                }
            ],
        }
        session = Session(song_id, directory, index)
        (directory / "v0.tokens").write_text(tokens.to_text() + "\n")
        self._write_index(session)
        with self._store_lock:
            self._sessions[song_id] = session
        return session

    def add_version(
        self,
        session: Session,
        tokens: TokenSequence,
        controls: dict,
        request: dict,
        matched: dict,
        parent: int,
    ) -> int:
        version_id = len(session.index["versions"])
        session.index["versions"].append(
            {
                "id": version_id,
                "parent": parent,
                "request": request,
                "controls": controls,
                "matched": matched,
                "created": _now(),
            }
        )
        (session.directory / f"v{version_id}.tokens").write_text(tokens.to_text() + "\n")
        self._write_index(session)
        return version_id

    @staticmethod
    def _write_index(session: Session) -> None:
        path = session.directory / "index.json"
        temp = path.with_suffix(".json.tmp")
        temp.write_text(json.dumps(session.index, indent=2))
        temp.replace(path)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _load_model(config: AppConfig) -> Seq2SeqTransformer:
    if config.checkpoint and Path(config.checkpoint).exists():
        model, _ = load_checkpoint(Path(config.checkpoint).read_bytes(), expected_vocab_size=360)
        return model
    # no checkpoint configured: a fresh toy model still produces
    # grammatically valid output, which keeps demos self-contained
    import torch

    torch.manual_seed(0)
    model = Seq2SeqTransformer(ModelConfig.toy())
    model.eval()
    return model


def create_app(config: AppConfig | None = None) -> FastAPI:
    config = config or AppConfig()
    calibration = (
        Calibration.load(config.calibration) if config.calibration else DEFAULT_CALIBRATION
    )
    store = SessionStore(config.data_dir)
    model = _load_model(config)
    decode_slots = threading.Semaphore(config.max_concurrent_decodes)

    testset_dir = Path(config.data_dir) / "testset"
    testset_dir.mkdir(parents=True, exist_ok=True)
    if not any(testset_dir.glob("*.mid")):
        (testset_dir / "two_bar_demo.mid").write_bytes(write_midi(two_bar_demo_song()))

    app = FastAPI(title="midifill", version="v1")

    @app.post("/v1/songs")
    async def upload_song(request: Request):
        body = await request.body()
        if len(body) > config.max_upload_bytes:
            raise HTTPException(status_code=413, detail="upload over the size cap")
        try:
            song = quantize(parse_midi(body))
            controls = compute_control_set(song, calibration)
        except Exception as error:  # noqa: BLE001 - client error surface
            raise HTTPException(status_code=400, detail=str(error)) from None
        tokens = encode_song(song, controls, calibration)
        metadata = {
            "bars": song.bars,
            "tracks": len(song.tracks),
            "time_signature": f"{song.time_signature[0]}/{song.time_signature[1]}",
            "warnings": list(song.warnings),
            "controls": controls.to_dict(),
        }
        session = store.create(body, tokens, metadata)
        return {
            "song_id": session.song_id,
            "version_id": 0,
            "tokens": tokens.to_text(),
            **metadata,
        }

    @app.get("/v1/songs/{song_id}")
    def song_summary(song_id: str):
        session = store.get(song_id)
        return session.index

    @app.post("/v1/songs/{song_id}/infill")
    def infill(song_id: str, body: InfillRequestModel):
        session = store.get(song_id)
        with session.lock:
            versions = session.index["versions"]
            parent = body.parent_version if body.parent_version is not None else len(versions) - 1
            if not 0 <= parent < len(versions):
                raise HTTPException(status_code=404, detail=f"unknown version {parent}")
            if not body.regions:
                raise HTTPException(status_code=422, detail="regions must be nonempty")
            parent_tokens = session.version_tokens(parent)
            overrides = body.control_overrides
            try:
                seq = apply_control_overrides(
                    parent_tokens,
                    overrides.tracks,
                    overrides.bars,
                )
                masked = mask_cells(seq, [(r.bar, r.track) for r in body.regions])
            except ValueError as error:
                raise HTTPException(status_code=422, detail=str(error)) from None

            with decode_slots:
                result = sample_infill(
                    model, masked, temperature=body.temperature, rng_seed=body.seed
                )
            song = decode_tokens(result.tokens, calibration)
            actual = compute_control_set(song, calibration)
            matched = _match_overrides(overrides, actual)
            version_id = store.add_version(
                session,
                result.tokens,
                actual.to_dict(),
                json.loads(body.model_dump_json()),
                matched,
                parent,
            )
        return {
            "version_id": version_id,
            "tokens": result.tokens.to_text(),
            "controls": actual.to_dict(),
            "matched": matched,
            "truncated": result.truncated,
        }

    @app.get("/v1/songs/{song_id}/versions/{version_id}/midi")
    def version_midi(song_id: str, version_id: int):
        session = store.get(song_id)
        versions = session.index["versions"]
        if not 0 <= version_id < len(versions):
            raise HTTPException(status_code=404, detail=f"unknown version {version_id}")
        tokens = session.version_tokens(version_id)
        if validate_grammar(tokens) is not None:
            raise HTTPException(status_code=500, detail="stored version fails validation")
        data = write_midi(decode_tokens(tokens, calibration))
        return Response(content=data, media_type="audio/midi")

    @app.get("/v1/testset")
    def testset():
        return {"samples": sorted(p.name for p in testset_dir.glob("*.mid"))}

    @app.get("/v1/testset/{name}")
    def testset_file(name: str):
        path = testset_dir / name
        if "/" in name or not path.exists():
            raise HTTPException(status_code=404, detail=f"unknown sample {name!r}")
        return Response(content=path.read_bytes(), media_type="audio/midi")

    app.state.store = store
    app.state.model = model
    app.state.config = config
    return app


def _match_overrides(overrides: OverridesModel, actual) -> dict:
    matched: dict = {"tracks": {}, "bars": {}}
    for track, controls in overrides.tracks.items():
        matched["tracks"][str(track)] = {}
        actual_track = actual.tracks[track]
        values = {
            "density": actual_track.density_bin,
            "occupation": actual_track.occupation_bin,
            "polyphony": actual_track.polyphony_bin,
        }
        for key, requested in controls.items():
            matched["tracks"][str(track)][key] = abs(values[key] - requested) <= MATCH_TOLERANCE
    for bar, controls in overrides.bars.items():
        matched["bars"][str(bar)] = {}
        actual_bar = actual.bars[bar]
        values = {"strain": actual_bar.strain_bin, "diameter": actual_bar.diameter_bin}
        for key, requested in controls.items():
            matched["bars"][str(bar)][key] = abs(values[key] - requested) <= MATCH_TOLERANCE
    return matched

"""Drive the HTTP service end to end without leaving the process.

Uploads a song, regenerates its melody with a density override, inspects
the tolerance-1 matched flags, and downloads the result as MIDI. The
same API backs the browser studio (see frontend/). Run the real server
with ``midifill serve --config <file>``.
"""

import tempfile

from fastapi.testclient import TestClient

from midifill.config import AppConfig
from midifill.midi_io import parse_midi, quantize, write_midi
from midifill.samples import two_bar_demo_song
from midifill.service import create_app

config = AppConfig(data_dir=tempfile.mkdtemp(prefix="midifill_demo_"))
client = TestClient(create_app(config))
print(f"session data under {config.data_dir} (no checkpoint: toy weights)")

# --- upload becomes version 0
upload = client.post("/v1/songs", content=write_midi(two_bar_demo_song())).json()
song_id = upload["song_id"]
print(f"\nuploaded song {song_id}: {upload['bars']} bars, {upload['tracks']} tracks")
print("  controls:", upload["controls"]["tracks"])

# --- regenerate the melody in both bars, asking for denser output
request = {
    "regions": [{"bar": 0, "track": 0}, {"bar": 1, "track": 0}],
    "control_overrides": {"tracks": {"0": {"density": 8}}},
    "temperature": 1.0,
    "seed": 42,
    "parent_version": 0,
}
infill = client.post(f"/v1/songs/{song_id}/infill", json=request).json()
print(f"\ninfill created version {infill['version_id']}")
print("  requested melody density 8, got bin", infill["controls"]["tracks"][0]["density"])
print("  matched within tolerance 1:", infill["matched"]["tracks"]["0"]["density"])

# --- the session records the whole version chain
summary = client.get(f"/v1/songs/{song_id}").json()
print("\nversions:", [(v["id"], v["parent"]) for v in summary["versions"]])

# --- download any version as MIDI
data = client.get(f"/v1/songs/{song_id}/versions/{infill['version_id']}/midi").content
song = quantize(parse_midi(data))
print(f"downloaded version as MIDI: {song.bars} bars, "
      f"{sum(len(t.notes) for t in song.tracks)} notes")

# --- bundled test songs are listed for the UI picker
print("\ntestset samples:", client.get("/v1/testset").json()["samples"])

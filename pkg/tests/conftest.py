import random

import pytest

from midifill.controls import BarControls, ControlSet, TrackControls
from midifill.midi_io import QuantizedSong, Role
from midifill.samples import random_song, two_bar_demo_song

# The worked two-bar example: token lists the encoder must reproduce.
PLAIN_TOKENS = (
    "4/4 t_3 i_0 i_32 i_48 "
    "bar track_0 e_0 p_79 n_4 e_4 p_76 n_4 e_8 p_74 n_6 "
    "track_1 e_0 p_45 n_8 e_8 p_41 n_8 "
    "track_2 e_0 p_64 p_67 n_8 e_0 p_60 n_16 e_8 p_65 n_8 "
    "bar track_0 e_0 p_69 n_4 e_4 p_71 n_4 e_8 p_72 n_6 "
    "track_1 e_0 p_43 n_8 e_8 p_48 n_8 "
    "track_2 e_0 p_59 p_65 p_67 n_8 e_8 p_60 p_64 n_8"
)

CONTROL_TOKENS = (
    "4/4 t_3 k_0 d_0 d_0 d_0 o_8 o_9 o_9 y_0 y_0 y_9 i_0 i_32 i_48 "
    "bar s_2 a_1 track_0 e_0 p_79 n_4 e_4 p_76 n_4 e_8 p_74 n_6 "
    "track_1 e_0 p_45 n_8 e_8 p_41 n_8 "
    "track_2 e_0 p_64 p_67 n_8 e_0 p_60 n_16 e_8 p_65 n_8 "
    "bar s_5 a_6 track_0 e_0 p_69 n_4 e_4 p_71 n_4 e_8 p_72 n_6 "
    "track_1 e_0 p_43 n_8 e_8 p_48 n_8 "
    "track_2 e_0 p_59 p_65 p_67 n_8 e_8 p_60 p_64 n_8"
)

# Encoder input after masking the first bar (all tracks) of the example.
MASKED_BAR0_ENCODER = (
    "4/4 t_3 k_0 d_0 d_0 d_0 o_8 o_9 o_9 y_0 y_0 y_9 i_0 i_32 i_48 "
    "bar s_2 a_1 mask mask mask "
    "bar s_5 a_6 track_0 e_0 p_69 n_4 e_4 p_71 n_4 e_8 p_72 n_6 "
    "track_1 e_0 p_43 n_8 e_8 p_48 n_8 "
    "track_2 e_0 p_59 p_65 p_67 n_8 e_8 p_60 p_64 n_8"
)

MASKED_BAR0_TARGET = (
    "track_0 e_0 p_79 n_4 e_4 p_76 n_4 e_8 p_74 n_6 eos "
    "track_1 e_0 p_45 n_8 e_8 p_41 n_8 eos "
    "track_2 e_0 p_64 p_67 n_8 e_0 p_60 n_16 e_8 p_65 n_8 eos"
)

# The control bins exactly as printed in the worked example.
PRINTED_CONTROLS = ControlSet(
    key_bin=0,
    tempo_bin=3,
    tracks=(
        TrackControls(density_bin=0, occupation_bin=8, polyphony_bin=0),
        TrackControls(density_bin=0, occupation_bin=9, polyphony_bin=0),
        TrackControls(density_bin=0, occupation_bin=9, polyphony_bin=9),
    ),
    bars=(
        BarControls(strain_bin=2, diameter_bin=1),
        BarControls(strain_bin=5, diameter_bin=6),
    ),
)


@pytest.fixture
def demo_song() -> QuantizedSong:
    return two_bar_demo_song()


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240)


def song_signature(song: QuantizedSong):
    """Comparable content of a song, ignoring the exact bpm (the tempo
    survives MIDI round trips only at bin resolution)."""
    return (
        song.time_signature,
        song.bars,
        tuple((t.role, t.instrument, t.notes) for t in song.tracks),
    )


def make_songs(seed: int, count: int, **kwargs):
    r = random.Random(seed)
    return [random_song(r, **kwargs) for _ in range(count)]


def roles_of(song: QuantizedSong):
    return [Role(t.role) for t in song.tracks]

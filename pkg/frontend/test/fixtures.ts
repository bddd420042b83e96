/** Shared token fixtures: the two-bar worked example and a regenerated child. */

import { ControlSetPayload } from "../src/api.js";

export const PARENT_TOKENS =
    "4/4 t_3 k_0 d_0 d_0 d_0 o_8 o_9 o_9 y_0 y_0 y_9 i_0 i_32 i_48 " +
    "bar s_2 a_1 track_0 e_0 p_79 n_4 e_4 p_76 n_4 e_8 p_74 n_6 " +
    "track_1 e_0 p_45 n_8 e_8 p_41 n_8 " +
    "track_2 e_0 p_64 p_67 n_8 e_0 p_60 n_16 e_8 p_65 n_8 " +
    "bar s_5 a_6 track_0 e_0 p_69 n_4 e_4 p_71 n_4 e_8 p_72 n_6 " +
    "track_1 e_0 p_43 n_8 e_8 p_48 n_8 " +
    "track_2 e_0 p_59 p_65 p_67 n_8 e_8 p_60 p_64 n_8";

/** The parent with every bar-0 cell regenerated (other cells untouched). */
export const CHILD_TOKENS =
    "4/4 t_3 k_0 d_0 d_0 d_0 o_8 o_9 o_9 y_0 y_0 y_9 i_0 i_32 i_48 " +
    "bar s_2 a_1 track_0 e_0 p_72 n_2 e_2 p_74 n_2 e_4 p_76 n_4 e_8 p_77 n_8 " +
    "track_1 e_0 p_36 n_16 " +
    "track_2 e_0 p_60 p_64 n_4 e_4 p_59 p_62 n_4 e_8 p_60 p_65 n_8 " +
    "bar s_5 a_6 track_0 e_0 p_69 n_4 e_4 p_71 n_4 e_8 p_72 n_6 " +
    "track_1 e_0 p_43 n_8 e_8 p_48 n_8 " +
    "track_2 e_0 p_59 p_65 p_67 n_8 e_8 p_60 p_64 n_8";

export const PARENT_CONTROLS: ControlSetPayload = {
    key_bin: 0,
    tempo_bin: 3,
    tracks: [
        { density: 1, occupation: 8, polyphony: 0 },
        { density: 1, occupation: 9, polyphony: 0 },
        { density: 2, occupation: 9, polyphony: 9 },
    ],
    bars: [
        { strain: 1, diameter: 11 },
        { strain: 1, diameter: 11 },
    ],
};

export function uploadResponseBody() {
    return {
        song_id: "abc123def456",
        version_id: 0,
        tokens: PARENT_TOKENS,
        bars: 2,
        tracks: 3,
        time_signature: "4/4",
        warnings: [],
        controls: PARENT_CONTROLS,
    };
}

export function infillResponseBody() {
    return {
        version_id: 1,
        tokens: CHILD_TOKENS,
        controls: PARENT_CONTROLS,
        matched: {
            tracks: { "0": { density: true } },
            bars: { "0": { strain: false } },
        },
        truncated: false,
    };
}

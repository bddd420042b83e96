import { beforeEach, describe, expect, it } from "vitest";

import { ControlEditor } from "../src/controls.js";
import { PARENT_CONTROLS } from "./fixtures.js";

describe("ControlEditor", () => {
    let editor: ControlEditor;

    beforeEach(() => {
        editor = new ControlEditor(structuredClone(PARENT_CONTROLS));
    });

    it("starts clean, pre-filled from the current control set", () => {
        expect(editor.hasEdits()).toBe(false);
        expect(editor.effectiveTrackValue(0, "density")).toBe(1);
        expect(editor.effectiveBarValue(1, "diameter")).toBe(11);
    });

    it("marks a track dirty on edit and clears when set back", () => {
        editor.setTrack(0, "density", 8);
        expect(editor.isTrackDirty(0, "density")).toBe(true);
        expect(editor.effectiveTrackValue(0, "density")).toBe(8);
        expect(editor.describeEdits()).toEqual(["track 0 density 1→8"]);

        editor.setTrack(0, "density", 1); // back to the current value
        expect(editor.hasEdits()).toBe(false);
        expect(editor.describeEdits()).toEqual([]);
    });

    it("accumulates multiple edits into one override object", () => {
        editor.setTrack(0, "density", 8);
        editor.setTrack(2, "polyphony", 2);
        editor.setBar(0, "strain", 6);
        expect(editor.toOverrides()).toEqual({
            tracks: { "0": { density: 8 }, "2": { polyphony: 2 } },
            bars: { "0": { strain: 6 } },
        });
    });

    it("clamps entries into the bin ranges by construction", () => {
        editor.setTrack(0, "density", 42);
        expect(editor.effectiveTrackValue(0, "density")).toBe(9);
        editor.setBar(0, "diameter", -5);
        expect(editor.effectiveBarValue(0, "diameter")).toBe(0);
        editor.setBar(0, "strain", 15);
        expect(editor.effectiveBarValue(0, "strain")).toBe(11);
    });

    it("reset clears the pending diff", () => {
        editor.setTrack(1, "occupation", 3);
        editor.setBar(1, "strain", 9);
        editor.reset();
        expect(editor.hasEdits()).toBe(false);
        expect(editor.toOverrides()).toEqual({ tracks: {}, bars: {} });
    });

    it("rebase adopts a new baseline", () => {
        editor.setTrack(0, "density", 8);
        const next = structuredClone(PARENT_CONTROLS);
        next.tracks[0]!.density = 8;
        editor.rebase(next);
        expect(editor.hasEdits()).toBe(false);
        expect(editor.effectiveTrackValue(0, "density")).toBe(8);
    });
});

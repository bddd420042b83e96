import { describe, expect, it } from "vitest";

import {
    DEFAULT_LAYOUT,
    cellKey,
    cellRect,
    laneHeight,
    laneTop,
    layoutNotes,
    noteRect,
} from "../src/pianoRoll.js";
import { decodeTokens } from "../src/tokens.js";
import { CHILD_TOKENS, PARENT_TOKENS } from "./fixtures.js";

describe("note layout", () => {
    const song = decodeTokens(PARENT_TOKENS);

    it("maps onsets and durations onto the step grid", () => {
        const note = { pitch: 74, onset: 8, duration: 6, bar: 0, track: 0 };
        const rect = noteRect(note, DEFAULT_LAYOUT);
        expect(rect.x).toBe(8 * DEFAULT_LAYOUT.stepWidth);
        expect(rect.width).toBe(6 * DEFAULT_LAYOUT.stepWidth);
        expect(rect.height).toBe(DEFAULT_LAYOUT.pitchHeight);
    });

    it("stacks lanes top to bottom by track, higher pitch higher up", () => {
        const rects = layoutNotes(song);
        const melody = rects.find((r) => r.pitch === 79)!;
        const bass = rects.find((r) => r.pitch === 41)!;
        expect(laneTop(1, DEFAULT_LAYOUT)).toBeGreaterThan(laneTop(0, DEFAULT_LAYOUT));
        expect(bass.y).toBeGreaterThan(melody.y);
        const high = rects.find((r) => r.pitch === 79)!;
        const low = rects.find((r) => r.pitch === 74)!;
        expect(high.y).toBeLessThan(low.y);
    });

    it("lays out one rectangle per note", () => {
        expect(layoutNotes(song)).toHaveLength(song.notes.length);
    });

    it("cell rectangles tile each lane bar by bar", () => {
        const first = cellRect(0, 0, song);
        const second = cellRect(1, 0, song);
        expect(second.x - first.x).toBe(song.stepsPerBar * DEFAULT_LAYOUT.stepWidth);
        expect(first.height).toBe(laneHeight(DEFAULT_LAYOUT));
        expect(cellRect(0, 2, song).y).toBe(laneTop(2, DEFAULT_LAYOUT));
    });
});

describe("parent/child comparison", () => {
    it("unmasked cells have pixel-identical note layouts", () => {
        const masked = new Set([cellKey(0, 0), cellKey(0, 1), cellKey(0, 2)]);
        const parent = layoutNotes(decodeTokens(PARENT_TOKENS));
        const child = layoutNotes(decodeTokens(CHILD_TOKENS));
        const outside = (rects: typeof parent) =>
            rects.filter((r) => !masked.has(cellKey(r.bar, r.track)));
        expect(outside(child)).toEqual(outside(parent));
    });

    it("masked cells did change", () => {
        const masked = new Set([cellKey(0, 0), cellKey(0, 1), cellKey(0, 2)]);
        const inside = (tokens: string) =>
            layoutNotes(decodeTokens(tokens)).filter((r) => masked.has(cellKey(r.bar, r.track)));
        expect(inside(CHILD_TOKENS)).not.toEqual(inside(PARENT_TOKENS));
    });
});

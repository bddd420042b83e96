/**
 * Piano-roll geometry and SVG rendering.
 *
 * Layout is a pure function from a decoded song to note rectangles on a
 * bar-by-step grid (one horizontal lane per track), so tests can compare
 * layouts without a DOM; rendering walks the rectangles into an SVG
 * element and highlights the currently selected (bar, track) cells.
 */

import { DecodedSong, Note, trackName } from "./tokens.js";

export interface LayoutOptions {
    stepWidth: number;
    pitchHeight: number;
    /** vertical pitch span rendered inside every track lane */
    pitchMin: number;
    pitchMax: number;
    laneGap: number;
}

export const DEFAULT_LAYOUT: LayoutOptions = {
    stepWidth: 9,
    pitchHeight: 3,
    pitchMin: 21,
    pitchMax: 108,
    laneGap: 12,
};

export interface NoteRect {
    x: number;
    y: number;
    width: number;
    height: number;
    bar: number;
    track: number;
    pitch: number;
}

export function laneHeight(options: LayoutOptions): number {
    return (options.pitchMax - options.pitchMin + 1) * options.pitchHeight;
}

export function laneTop(track: number, options: LayoutOptions): number {
    return track * (laneHeight(options) + options.laneGap);
}

export function noteRect(note: Note, options: LayoutOptions): NoteRect {
    const lane = laneTop(note.track, options);
    const clamped = Math.min(Math.max(note.pitch, options.pitchMin), options.pitchMax);
    return {
        x: note.onset * options.stepWidth,
        y: lane + (options.pitchMax - clamped) * options.pitchHeight,
        width: note.duration * options.stepWidth,
        height: options.pitchHeight,
        bar: note.bar,
        track: note.track,
        pitch: note.pitch,
    };
}

export function layoutNotes(song: DecodedSong, options: LayoutOptions = DEFAULT_LAYOUT): NoteRect[] {
    return song.notes.map((note) => noteRect(note, options));
}

/** Rectangles of the selectable (bar, track) cells. */
export function cellRect(
    bar: number,
    track: number,
    song: DecodedSong,
    options: LayoutOptions = DEFAULT_LAYOUT,
): { x: number; y: number; width: number; height: number } {
    return {
        x: bar * song.stepsPerBar * options.stepWidth,
        y: laneTop(track, options),
        width: song.stepsPerBar * options.stepWidth,
        height: laneHeight(options),
    };
}

export function cellKey(bar: number, track: number): string {
    return `${bar}:${track}`;
}

const SVG_NS = "http://www.w3.org/2000/svg";

function svgElement<K extends keyof SVGElementTagNameMap>(
    tag: K,
    attributes: Record<string, string | number>,
): SVGElementTagNameMap[K] {
    const node = document.createElementNS(SVG_NS, tag);
    for (const [key, value] of Object.entries(attributes)) {
        node.setAttribute(key, String(value));
    }
    return node;
}

export interface RenderHandlers {
    onCellClick?: (bar: number, track: number) => void;
}

/**
 * Draw the song into `container` (replacing previous content): bar
 * columns, one lane per track, note rectangles, and a translucent
 * overlay on each selected cell.
 */
export function renderPianoRoll(
    container: HTMLElement,
    song: DecodedSong,
    selected: Set<string>,
    options: LayoutOptions = DEFAULT_LAYOUT,
    handlers: RenderHandlers = {},
): void {
    const width = song.barCount * song.stepsPerBar * options.stepWidth;
    const height = laneTop(song.trackCount - 1, options) + laneHeight(options);
    const svg = svgElement("svg", {
        width,
        height,
        viewBox: `0 0 ${width} ${height}`,
        class: "piano-roll",
    });

    for (let track = 0; track < song.trackCount; track += 1) {
        const lane = svgElement("rect", {
            x: 0,
            y: laneTop(track, options),
            width,
            height: laneHeight(options),
            class: "lane",
            "data-track": track,
        });
        svg.appendChild(lane);
        const label = svgElement("text", {
            x: 4,
            y: laneTop(track, options) + 12,
            class: "lane-label",
        });
        label.textContent = trackName(track);
        svg.appendChild(label);
    }

    for (let bar = 0; bar <= song.barCount; bar += 1) {
        const x = bar * song.stepsPerBar * options.stepWidth;
        svg.appendChild(svgElement("line", { x1: x, y1: 0, x2: x, y2: height, class: "bar-line" }));
    }

    for (const rect of layoutNotes(song, options)) {
        svg.appendChild(
            svgElement("rect", {
                x: rect.x,
                y: rect.y,
                width: rect.width,
                height: rect.height,
                rx: 1,
                class: `note note-track-${rect.track}`,
                "data-pitch": rect.pitch,
            }),
        );
    }

    for (let bar = 0; bar < song.barCount; bar += 1) {
        for (let track = 0; track < song.trackCount; track += 1) {
            const cell = cellRect(bar, track, song, options);
            const overlay = svgElement("rect", {
                ...cell,
                class: selected.has(cellKey(bar, track)) ? "cell selected" : "cell",
                "data-bar": bar,
                "data-track": track,
            });
            if (handlers.onCellClick) {
                overlay.addEventListener("click", () => handlers.onCellClick!(bar, track));
            }
            svg.appendChild(overlay);
        }
    }

    container.replaceChildren(svg);
}

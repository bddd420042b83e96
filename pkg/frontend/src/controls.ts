/**
 * Pending control-override state for the editing panel.
 *
 * Selectors are pre-filled from the current version's control set; edits
 * accumulate into a pending override map shown as a diff against the
 * current values. Setting a selector back to the current value clears
 * its dirty state. Values are clamped into their bin ranges on entry,
 * so an out-of-range override is impossible by construction.
 */

import { BarControlBins, ControlOverrides, ControlSetPayload, TrackControlBins } from "./api.js";

export const TRACK_CONTROL_KEYS = ["density", "occupation", "polyphony"] as const;
export const BAR_CONTROL_KEYS = ["strain", "diameter"] as const;

export type TrackControlKey = (typeof TRACK_CONTROL_KEYS)[number];
export type BarControlKey = (typeof BAR_CONTROL_KEYS)[number];

export const TRACK_BIN_MAX = 9;
export const BAR_BIN_MAX = 11;

function clamp(value: number, max: number): number {
    return Math.min(Math.max(Math.round(value), 0), max);
}

export class ControlEditor {
    private pendingTracks = new Map<number, Partial<TrackControlBins>>();
    private pendingBars = new Map<number, Partial<BarControlBins>>();

    constructor(private current: ControlSetPayload) {}

    /** Replace the baseline (a new version was accepted) and clear edits. */
    rebase(current: ControlSetPayload): void {
        this.current = current;
        this.reset();
    }

    reset(): void {
        this.pendingTracks.clear();
        this.pendingBars.clear();
    }

    currentTrackValue(track: number, key: TrackControlKey): number {
        return this.current.tracks[track]![key];
    }

    currentBarValue(bar: number, key: BarControlKey): number {
        return this.current.bars[bar]![key];
    }

    effectiveTrackValue(track: number, key: TrackControlKey): number {
        return this.pendingTracks.get(track)?.[key] ?? this.currentTrackValue(track, key);
    }

    effectiveBarValue(bar: number, key: BarControlKey): number {
        return this.pendingBars.get(bar)?.[key] ?? this.currentBarValue(bar, key);
    }

    setTrack(track: number, key: TrackControlKey, value: number): void {
        const clamped = clamp(value, TRACK_BIN_MAX);
        const entry = this.pendingTracks.get(track) ?? {};
        if (clamped === this.currentTrackValue(track, key)) {
            delete entry[key];
        } else {
            entry[key] = clamped;
        }
        if (Object.keys(entry).length === 0) {
            this.pendingTracks.delete(track);
        } else {
            this.pendingTracks.set(track, entry);
        }
    }

    setBar(bar: number, key: BarControlKey, value: number): void {
        const clamped = clamp(value, BAR_BIN_MAX);
        const entry = this.pendingBars.get(bar) ?? {};
        if (clamped === this.currentBarValue(bar, key)) {
            delete entry[key];
        } else {
            entry[key] = clamped;
        }
        if (Object.keys(entry).length === 0) {
            this.pendingBars.delete(bar);
        } else {
            this.pendingBars.set(bar, entry);
        }
    }

    isTrackDirty(track: number, key?: TrackControlKey): boolean {
        const entry = this.pendingTracks.get(track);
        if (!entry) return false;
        return key === undefined ? true : entry[key] !== undefined;
    }

    isBarDirty(bar: number, key?: BarControlKey): boolean {
        const entry = this.pendingBars.get(bar);
        if (!entry) return false;
        return key === undefined ? true : entry[key] !== undefined;
    }

    hasEdits(): boolean {
        return this.pendingTracks.size > 0 || this.pendingBars.size > 0;
    }

    /** Human-readable pending diff, e.g. "track 0 density 1→8". */
    describeEdits(): string[] {
        const lines: string[] = [];
        for (const [track, entry] of this.pendingTracks) {
            for (const key of TRACK_CONTROL_KEYS) {
                const value = entry[key];
                if (value !== undefined) {
                    lines.push(`track ${track} ${key} ${this.currentTrackValue(track, key)}→${value}`);
                }
            }
        }
        for (const [bar, entry] of this.pendingBars) {
            for (const key of BAR_CONTROL_KEYS) {
                const value = entry[key];
                if (value !== undefined) {
                    lines.push(`bar ${bar} ${key} ${this.currentBarValue(bar, key)}→${value}`);
                }
            }
        }
        return lines.sort();
    }

    /** The override object of the /infill request body. */
    toOverrides(): ControlOverrides {
        const tracks: Record<string, Partial<TrackControlBins>> = {};
        for (const [track, entry] of this.pendingTracks) {
            tracks[String(track)] = { ...entry };
        }
        const bars: Record<string, Partial<BarControlBins>> = {};
        for (const [bar, entry] of this.pendingBars) {
            bars[String(bar)] = { ...entry };
        }
        return { tracks, bars };
    }
}

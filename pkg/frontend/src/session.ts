/**
 * Version-history state for one editing session.
 *
 * The studio never mutates notes locally: every version's tokens come
 * from a service response, and generation requests always carry an
 * explicit seed so any result can be reproduced. Generated versions
 * start out pending next to their parent until accepted or discarded;
 * discarding only moves the view back, the service keeps the record.
 */

import {
    ControlSetPayload,
    InfillRequest,
    InfillResponse,
    MatchedFlags,
    Region,
    StudioApi,
    UploadResponse,
} from "./api.js";
import { ControlOverrides } from "./api.js";

export interface VersionView {
    id: number;
    parent: number | null;
    tokens: string;
    controls: ControlSetPayload;
    matched: MatchedFlags | null;
    seed: number | null;
}

export function buildInfillRequest(
    regions: Region[],
    overrides: ControlOverrides,
    temperature: number,
    seed: number,
    parentVersion: number,
): InfillRequest {
    if (regions.length === 0) throw new Error("select at least one cell to regenerate");
    return {
        regions: regions.map(({ bar, track }) => ({ bar, track })),
        control_overrides: overrides,
        temperature,
        seed,
        parent_version: parentVersion,
    };
}

export interface ToleranceBadge {
    scope: "track" | "bar";
    index: number;
    control: string;
    matched: boolean;
}

/** Flatten the service's matched flags into renderable badges. */
export function toleranceBadges(matched: MatchedFlags | null): ToleranceBadge[] {
    if (!matched) return [];
    const badges: ToleranceBadge[] = [];
    for (const [index, controls] of Object.entries(matched.tracks)) {
        for (const [control, ok] of Object.entries(controls)) {
            badges.push({ scope: "track", index: Number(index), control, matched: ok });
        }
    }
    for (const [index, controls] of Object.entries(matched.bars)) {
        for (const [control, ok] of Object.entries(controls)) {
            badges.push({ scope: "bar", index: Number(index), control, matched: ok });
        }
    }
    return badges.sort((a, b) =>
        a.scope === b.scope
            ? a.index - b.index || a.control.localeCompare(b.control)
            : a.scope.localeCompare(b.scope),
    );
}

export class StudioSession {
    songId: string | null = null;
    versions: VersionView[] = [];
    /** version shown as "current" (the accepted baseline) */
    currentId = 0;
    /** freshly generated version awaiting accept/discard, if any */
    pendingId: number | null = null;
    generating = false;

    constructor(private readonly api: StudioApi) {}

    get current(): VersionView {
        const version = this.versions.find((v) => v.id === this.currentId);
        if (!version) throw new Error("no current version");
        return version;
    }

    get pending(): VersionView | null {
        return this.pendingId === null
            ? null
            : (this.versions.find((v) => v.id === this.pendingId) ?? null);
    }

    async upload(midiBytes: ArrayBuffer | Uint8Array): Promise<UploadResponse> {
        const response = await this.api.uploadSong(midiBytes);
        this.songId = response.song_id;
        this.versions = [
            {
                id: response.version_id,
                parent: null,
                tokens: response.tokens,
                controls: response.controls,
                matched: null,
                seed: null,
            },
        ];
        this.currentId = response.version_id;
        this.pendingId = null;
        return response;
    }

    /** One in-flight generation at a time; resolves to the new version. */
    async generate(
        regions: Region[],
        overrides: ControlOverrides,
        temperature: number,
        seed: number,
    ): Promise<InfillResponse> {
        if (!this.songId) throw new Error("upload a song first");
        if (this.generating) throw new Error("a generation is already in flight");
        const request = buildInfillRequest(regions, overrides, temperature, seed, this.currentId);
        this.generating = true;
        try {
            const response = await this.api.infill(this.songId, request);
            this.versions.push({
                id: response.version_id,
                parent: this.currentId,
                tokens: response.tokens,
                controls: response.controls,
                matched: response.matched,
                seed,
            });
            this.pendingId = response.version_id;
            return response;
        } finally {
            this.generating = false;
        }
    }

    /** Make the pending version the new baseline. */
    accept(): void {
        if (this.pendingId === null) return;
        this.currentId = this.pendingId;
        this.pendingId = null;
    }

    /** Drop the pending version from view (the parent stays current). */
    discard(): void {
        this.pendingId = null;
    }

    downloadUrl(versionId: number): string {
        if (!this.songId) throw new Error("upload a song first");
        return this.api.midiUrl(this.songId, versionId);
    }

    /** ids from the root to the current version */
    chain(): number[] {
        const byId = new Map(this.versions.map((v) => [v.id, v]));
        const ids: number[] = [];
        let cursor: number | null = this.currentId;
        while (cursor !== null) {
            ids.push(cursor);
            cursor = byId.get(cursor)?.parent ?? null;
        }
        return ids.reverse();
    }
}

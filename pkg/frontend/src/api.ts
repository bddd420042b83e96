/**
 * Typed client for the midifill /v1 REST API.
 *
 * The fetch implementation is injectable so tests can assert the exact
 * request payloads without a server.
 */

export interface TrackControlBins {
    density: number;
    occupation: number;
    polyphony: number;
}

export interface BarControlBins {
    strain: number;
    diameter: number;
}

export interface ControlSetPayload {
    key_bin: number;
    tempo_bin: number;
    tracks: TrackControlBins[];
    bars: BarControlBins[];
}

export interface UploadResponse {
    song_id: string;
    version_id: number;
    tokens: string;
    bars: number;
    tracks: number;
    time_signature: string;
    warnings: string[];
    controls: ControlSetPayload;
}

export interface Region {
    bar: number;
    track: number;
}

export interface ControlOverrides {
    tracks: Record<string, Partial<TrackControlBins>>;
    bars: Record<string, Partial<BarControlBins>>;
}

export interface InfillRequest {
    regions: Region[];
    control_overrides: ControlOverrides;
    temperature: number;
    seed: number;
    parent_version: number;
}

export type MatchedFlags = {
    tracks: Record<string, Record<string, boolean>>;
    bars: Record<string, Record<string, boolean>>;
};

export interface InfillResponse {
    version_id: number;
    tokens: string;
    controls: ControlSetPayload;
    matched: MatchedFlags;
    truncated: boolean;
}

export interface VersionRecord {
    id: number;
    parent: number | null;
    request: InfillRequest | null;
    controls: ControlSetPayload;
    matched: MatchedFlags | null;
    created: string;
}

export interface SessionSummary {
    song_id: string;
    bars: number;
    tracks: number;
    time_signature: string;
    versions: VersionRecord[];
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
    constructor(
        public readonly status: number,
        detail: string,
    ) {
        super(`HTTP ${status}: ${detail}`);
    }
}

export class StudioApi {
    constructor(
        private readonly baseUrl: string = "",
        private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
    ) {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
        if (!response.ok) {
            let detail = response.statusText;
            try {
                const body = (await response.json()) as { detail?: string };
                if (body.detail) detail = body.detail;
            } catch {
                // keep the status text
            }
            throw new ApiError(response.status, detail);
        }
        return (await response.json()) as T;
    }

    uploadSong(midiBytes: ArrayBuffer | Uint8Array): Promise<UploadResponse> {
        const body = midiBytes instanceof Uint8Array ? new Uint8Array(midiBytes) : midiBytes;
        return this.request<UploadResponse>("/v1/songs", {
            method: "POST",
            headers: { "Content-Type": "audio/midi" },
            body: body as BodyInit,
        });
    }

    infill(songId: string, request: InfillRequest): Promise<InfillResponse> {
        return this.request<InfillResponse>(`/v1/songs/${songId}/infill`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(request),
        });
    }

    summary(songId: string): Promise<SessionSummary> {
        return this.request<SessionSummary>(`/v1/songs/${songId}`);
    }

    midiUrl(songId: string, versionId: number): string {
        return `${this.baseUrl}/v1/songs/${songId}/versions/${versionId}/midi`;
    }

    async listTestset(): Promise<string[]> {
        const data = await this.request<{ samples: string[] }>("/v1/testset");
        return data.samples;
    }

    async fetchTestsetFile(name: string): Promise<ArrayBuffer> {
        const response = await this.fetchImpl(`${this.baseUrl}/v1/testset/${name}`);
        if (!response.ok) throw new ApiError(response.status, response.statusText);
        return response.arrayBuffer();
    }
}

/**
 * Client-side decoding of the service's token sequences, for display only.
 *
 * The service remains the single source of musical truth; this parser
 * exists so the piano roll can draw note rectangles from the `tokens`
 * field of a response without another round trip. The grammar mirrors
 * the backend: a header (time signature, tempo, optional controls,
 * instruments) followed by per-bar blocks of track cells made of
 * `position pitch+ duration` groups.
 */

export interface Note {
    pitch: number;
    /** absolute onset in 16th-note steps from the song start */
    onset: number;
    duration: number;
    bar: number;
    track: number;
}

export interface TrackControls {
    density: number;
    occupation: number;
    polyphony: number;
}

export interface BarControls {
    strain: number;
    diameter: number;
}

export interface DecodedSong {
    timeSignature: string;
    stepsPerBar: number;
    tempoBin: number;
    keyBin: number | null;
    instruments: number[];
    trackCount: number;
    barCount: number;
    notes: Note[];
    trackControls: TrackControls[];
    barControls: BarControls[];
}

const STEPS_PER_BAR: Record<string, number> = {
    "4/4": 16,
    "3/4": 12,
    "2/4": 8,
    "6/8": 12,
};

function numberOf(token: string): number {
    return parseInt(token.slice(token.indexOf("_") + 1), 10);
}

function isKind(token: string | undefined, prefix: string): token is string {
    if (token === undefined || !token.startsWith(prefix)) return false;
    return /^\d+$/.test(token.slice(prefix.length));
}

export function decodeTokens(text: string): DecodedSong {
    const tokens = text.trim().split(/\s+/).filter((t) => t.length > 0);
    let pos = 0;
    const fail = (reason: string): never => {
        throw new Error(`token ${pos} (${tokens[pos] ?? "<end>"}): ${reason}`);
    };

    const timeSignature = tokens[pos];
    if (timeSignature === undefined || !(timeSignature in STEPS_PER_BAR)) {
        return fail("expected a time-signature token");
    }
    const stepsPerBar = STEPS_PER_BAR[timeSignature]!;
    pos += 1;
    if (!isKind(tokens[pos], "t_")) fail("expected a tempo token");
    const tempoBin = numberOf(tokens[pos]!);
    pos += 1;

    let keyBin: number | null = null;
    const trackControls: TrackControls[] = [];
    if (isKind(tokens[pos], "k_")) {
        keyBin = numberOf(tokens[pos]!);
        pos += 1;
        const densities: number[] = [];
        while (isKind(tokens[pos], "d_")) {
            densities.push(numberOf(tokens[pos]!));
            pos += 1;
        }
        const occupations: number[] = [];
        while (isKind(tokens[pos], "o_")) {
            occupations.push(numberOf(tokens[pos]!));
            pos += 1;
        }
        const polyphonies: number[] = [];
        while (isKind(tokens[pos], "y_")) {
            polyphonies.push(numberOf(tokens[pos]!));
            pos += 1;
        }
        if (
            densities.length === 0 ||
            occupations.length !== densities.length ||
            polyphonies.length !== densities.length
        ) {
            fail("inconsistent track-control header");
        }
        for (let i = 0; i < densities.length; i += 1) {
            trackControls.push({
                density: densities[i]!,
                occupation: occupations[i]!,
                polyphony: polyphonies[i]!,
            });
        }
    }

    const instruments: number[] = [];
    while (isKind(tokens[pos], "i_")) {
        instruments.push(numberOf(tokens[pos]!));
        pos += 1;
    }
    if (instruments.length < 2 || instruments.length > 3) fail("expected 2-3 instrument tokens");
    if (trackControls.length > 0 && trackControls.length !== instruments.length) {
        fail("control header disagrees with instrument count");
    }
    const trackCount = instruments.length;

    const notes: Note[] = [];
    const barControls: BarControls[] = [];
    let barCount = 0;
    while (pos < tokens.length) {
        if (tokens[pos] !== "bar") fail("expected 'bar'");
        pos += 1;
        const bar = barCount;
        barCount += 1;
        if (keyBin !== null) {
            if (!isKind(tokens[pos], "s_")) fail("expected a tensile-strain token");
            const strain = numberOf(tokens[pos]!);
            pos += 1;
            if (!isKind(tokens[pos], "a_")) fail("expected a cloud-diameter token");
            barControls.push({ strain, diameter: numberOf(tokens[pos]!) });
            pos += 1;
        }
        for (let track = 0; track < trackCount; track += 1) {
            if (tokens[pos] !== `track_${track}`) fail(`expected 'track_${track}'`);
            pos += 1;
            let position: number | null = null;
            while (isKind(tokens[pos], "e_")) {
                const next = numberOf(tokens[pos]!);
                if (next >= stepsPerBar) fail("position outside the bar");
                if (position !== null && next < position) fail("positions must not decrease");
                position = next;
                pos += 1;
                const pitches: number[] = [];
                while (isKind(tokens[pos], "p_")) {
                    pitches.push(numberOf(tokens[pos]!));
                    pos += 1;
                }
                if (pitches.length === 0) fail("expected a pitch after the position");
                if (!isKind(tokens[pos], "n_")) fail("expected a duration after the pitches");
                const duration = numberOf(tokens[pos]!);
                pos += 1;
                for (const pitch of pitches) {
                    notes.push({ pitch, onset: bar * stepsPerBar + position, duration, bar, track });
                }
            }
        }
    }
    if (barCount === 0) fail("no bars");

    return {
        timeSignature,
        stepsPerBar,
        tempoBin,
        keyBin,
        instruments,
        trackCount,
        barCount,
        notes,
        trackControls,
        barControls,
    };
}

export const TRACK_NAMES = ["melody", "bass", "accompaniment"] as const;

export function trackName(track: number): string {
    return TRACK_NAMES[track] ?? `track ${track}`;
}

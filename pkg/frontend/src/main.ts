/**
 * DOM wiring for the studio: upload/testset pickers, side-by-side piano
 * rolls (current vs pending), the control panel, the generate/compare
 * loop with tolerance badges, and version history with MIDI download.
 */

import { StudioApi } from "./api.js";
import {
    BAR_BIN_MAX,
    BAR_CONTROL_KEYS,
    ControlEditor,
    TRACK_BIN_MAX,
    TRACK_CONTROL_KEYS,
} from "./controls.js";
import { cellKey, renderPianoRoll } from "./pianoRoll.js";
import { StudioSession, toleranceBadges } from "./session.js";
import { decodeTokens, trackName } from "./tokens.js";

const api = new StudioApi("");
const session = new StudioSession(api);
let editor: ControlEditor | null = null;
const selectedCells = new Set<string>();

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
}

function setStatus(text: string, isError = false): void {
    const status = el<HTMLElement>("status");
    status.textContent = text;
    status.className = isError ? "status error" : "status";
}

function renderRolls(): void {
    const current = decodeTokens(session.current.tokens);
    renderPianoRoll(el("current-roll"), current, selectedCells, undefined, {
        onCellClick: (bar, track) => {
            const key = cellKey(bar, track);
            if (selectedCells.has(key)) selectedCells.delete(key);
            else selectedCells.add(key);
            renderRolls();
        },
    });
    const pendingPane = el("pending-pane");
    if (session.pending) {
        pendingPane.hidden = false;
        renderPianoRoll(el("pending-roll"), decodeTokens(session.pending.tokens), new Set());
        renderBadges();
    } else {
        pendingPane.hidden = true;
    }
}

function renderBadges(): void {
    const container = el("badges");
    container.replaceChildren();
    const badges = toleranceBadges(session.pending?.matched ?? null);
    for (const badge of badges) {
        const span = document.createElement("span");
        span.className = badge.matched ? "badge matched" : "badge unmatched";
        const where = badge.scope === "track" ? trackName(badge.index) : `bar ${badge.index}`;
        span.textContent = `${where} ${badge.control}: ${badge.matched ? "within" : "outside"} tolerance 1`;
        container.appendChild(span);
    }
}

function renderControls(): void {
    if (!editor) return;
    const current = decodeTokens(session.current.tokens);
    const panel = el("control-panel");
    panel.replaceChildren();

    for (let track = 0; track < current.trackCount; track += 1) {
        const row = document.createElement("div");
        row.className = "control-row";
        row.append(`${trackName(track)}: `);
        for (const key of TRACK_CONTROL_KEYS) {
            row.append(` ${key} `);
            const input = document.createElement("input");
            input.type = "number";
            input.min = "0";
            input.max = String(TRACK_BIN_MAX);
            input.value = String(editor.effectiveTrackValue(track, key));
            input.className = editor.isTrackDirty(track, key) ? "bin dirty" : "bin";
            input.addEventListener("change", () => {
                editor!.setTrack(track, key, Number(input.value));
                renderControls();
            });
            row.appendChild(input);
        }
        panel.appendChild(row);
    }
    for (let bar = 0; bar < current.barCount; bar += 1) {
        const row = document.createElement("div");
        row.className = "control-row";
        row.append(`bar ${bar}: `);
        for (const key of BAR_CONTROL_KEYS) {
            row.append(` ${key} `);
            const input = document.createElement("input");
            input.type = "number";
            input.min = "0";
            input.max = String(BAR_BIN_MAX);
            input.value = String(editor.effectiveBarValue(bar, key));
            input.className = editor.isBarDirty(bar, key) ? "bin dirty" : "bin";
            input.addEventListener("change", () => {
                editor!.setBar(bar, key, Number(input.value));
                renderControls();
            });
            row.appendChild(input);
        }
        panel.appendChild(row);
    }

    const diff = el("pending-diff");
    const lines = editor.describeEdits();
    diff.textContent = lines.length ? `pending: ${lines.join(", ")}` : "no control edits";
    const resetButton = el<HTMLButtonElement>("reset-controls");
    resetButton.onclick = () => {
        editor!.reset();
        renderControls();
    };
}

function renderVersions(): void {
    const list = el("versions");
    list.replaceChildren();
    for (const version of session.versions) {
        const item = document.createElement("li");
        const label =
            version.id === session.currentId
                ? `v${version.id} (current)`
                : version.id === session.pendingId
                  ? `v${version.id} (pending)`
                  : `v${version.id}`;
        item.append(
            `${label}${version.parent !== null ? ` ← v${version.parent}` : ""}` +
                `${version.seed !== null ? `, seed ${version.seed}` : ""} `,
        );
        const download = document.createElement("a");
        download.href = session.downloadUrl(version.id);
        download.textContent = "midi";
        download.setAttribute("download", `version_${version.id}.mid`);
        item.appendChild(download);
        list.appendChild(item);
    }
}

function refresh(): void {
    renderRolls();
    renderControls();
    renderVersions();
    el<HTMLButtonElement>("generate").disabled = session.generating;
    el<HTMLButtonElement>("accept").disabled = session.pending === null;
    el<HTMLButtonElement>("discard").disabled = session.pending === null;
}

async function loadSong(bytes: ArrayBuffer): Promise<void> {
    const response = await session.upload(bytes);
    editor = new ControlEditor(response.controls);
    selectedCells.clear();
    setStatus(
        `loaded ${response.bars} bars x ${response.tracks} tracks (${response.time_signature})` +
            (response.warnings.length ? ` — ${response.warnings.join("; ")}` : ""),
    );
    refresh();
}

async function main(): Promise<void> {
    el<HTMLInputElement>("file-input").addEventListener("change", async (event) => {
        const input = event.target as HTMLInputElement;
        const file = input.files?.[0];
        if (!file) return;
        try {
            await loadSong(await file.arrayBuffer());
        } catch (error) {
            setStatus(String(error), true);
        }
    });

    const picker = el<HTMLSelectElement>("testset-picker");
    try {
        for (const name of await api.listTestset()) {
            const option = document.createElement("option");
            option.value = name;
            option.textContent = name;
            picker.appendChild(option);
        }
    } catch (error) {
        setStatus(`service unreachable: ${String(error)}`, true);
    }
    el<HTMLButtonElement>("load-testset").addEventListener("click", async () => {
        if (!picker.value) return;
        try {
            await loadSong(await api.fetchTestsetFile(picker.value));
        } catch (error) {
            setStatus(String(error), true);
        }
    });

    el<HTMLButtonElement>("generate").addEventListener("click", async () => {
        if (!editor) return;
        const regions = [...selectedCells].map((key) => {
            const [bar, track] = key.split(":").map(Number);
            return { bar: bar!, track: track! };
        });
        const seed = Number(el<HTMLInputElement>("seed").value);
        const temperature = Number(el<HTMLInputElement>("temperature").value);
        try {
            setStatus("generating…");
            refresh();
            await session.generate(regions, editor.toOverrides(), temperature, seed);
            setStatus(`generated v${session.pendingId} (seed ${seed})`);
        } catch (error) {
            setStatus(String(error), true);
        }
        refresh();
    });

    el<HTMLButtonElement>("accept").addEventListener("click", () => {
        session.accept();
        if (editor) editor.rebase(decodeControls());
        selectedCells.clear();
        setStatus(`v${session.currentId} is now current`);
        refresh();
    });

    el<HTMLButtonElement>("discard").addEventListener("click", () => {
        session.discard();
        setStatus("discarded; parent stays current");
        refresh();
    });
}

function decodeControls() {
    return session.current.controls;
}

main().catch((error) => setStatus(String(error), true));

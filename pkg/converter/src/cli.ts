#!/usr/bin/env node
/**
 * gvg-convert: turn public graph-dataset distributions into GVG containers.
 *
 *   convert --dataset cora --raw-dir data/cora --out cora.gvg --seed 42
 *
 * Options: --per-class N (default 20 labeled nodes per class),
 * --no-validate (skip the published-statistics check for custom data).
 */

import { convertDataset, StatMismatchError } from "./convert.js";
import { DATASETS } from "./datasets.js";

interface Parsed {
    command: string;
    flags: Map<string, string | boolean>;
}

function parseArgs(argv: string[]): Parsed {
    const [command, ...rest] = argv;
    const flags = new Map<string, string | boolean>();
    for (let i = 0; i < rest.length; i++) {
        const arg = rest[i];
        if (!arg.startsWith("--")) throw new Error(`unexpected argument ${arg}`);
        const name = arg.slice(2);
        if (i + 1 < rest.length && !rest[i + 1].startsWith("--")) {
            flags.set(name, rest[++i]);
        } else {
            flags.set(name, true);
        }
    }
    return { command: command ?? "", flags };
}

function usage(): string {
    return [
        "usage: gvg-convert convert --dataset <name> --raw-dir <dir> --out <file>",
        "                           [--seed 42] [--per-class 20] [--no-validate]",
        `datasets: ${Object.keys(DATASETS).join(", ")}`,
    ].join("\n");
}

export function main(argv: string[]): number {
    let parsed: Parsed;
    try {
        parsed = parseArgs(argv);
    } catch (err) {
        console.error(String(err));
        console.error(usage());
        return 2;
    }
    if (parsed.command !== "convert") {
        console.error(usage());
        return 2;
    }
    const get = (name: string): string | undefined => {
        const v = parsed.flags.get(name);
        return typeof v === "string" ? v : undefined;
    };
    const dataset = get("dataset");
    const out = get("out");
    if (!dataset || !out) {
        console.error("--dataset and --out are required");
        console.error(usage());
        return 2;
    }
    try {
        convertDataset({
            dataset,
            rawDir: get("raw-dir") ?? `data/${dataset}`,
            outPath: out,
            seed: get("seed") !== undefined ? parseInt(get("seed")!, 10) : 42,
            perClass: get("per-class") !== undefined ? parseInt(get("per-class")!, 10) : 20,
            noValidate: parsed.flags.get("no-validate") === true,
        });
        return 0;
    } catch (err) {
        if (err instanceof StatMismatchError) {
            console.error(`statistics mismatch: ${err.message}`);
        } else {
            console.error(String(err));
        }
        return 1;
    }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("gvg-convert")) {
    process.exit(main(process.argv.slice(2)));
}

// Minimal declarations for untyped runtime dependencies (the sandbox mirror
// provides the packages globally but not their @types counterparts).

declare module "yargs" {
  interface Argv {
    command(name: string, desc: string, builder: (y: Argv) => Argv): Argv;
    option(name: string, opts: Record<string, unknown>): Argv;
    demandOption(name: string): Argv;
    demandCommand(n: number): Argv;
    strict(): Argv;
    exitProcess(enable: boolean): Argv;
    fail(handler: (msg: string) => void): Argv;
    parseSync(): Record<string, unknown>;
  }
  function yargs(argv: string[]): Argv;
  export default yargs;
}

declare module "yargs/helpers" {
  export function hideBin(argv: string[]): string[];
}

declare module "papaparse" {
  export interface ParseError {
    message: string;
  }
  export interface ParseResult<T> {
    data: T[];
    errors: ParseError[];
    meta: { fields?: string[] };
  }
  export interface ParseConfig {
    header?: boolean;
    dynamicTyping?: boolean;
    skipEmptyLines?: boolean;
  }
  function parse<T>(input: string, config?: ParseConfig): ParseResult<T>;
  const Papa: { parse: typeof parse };
  export default Papa;
}

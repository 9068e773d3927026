export class LineBuffer {
  private tail = "";

  feed(chunk: string): string[] {
    this.tail += chunk;
    const parts = this.tail.split("\n");
    this.tail = parts.pop() ?? "";
    return parts.filter((p) => p.length > 0);
  }

  flush(): string | null {
    const rest = this.tail;
    this.tail = "";
    return rest.length > 0 ? rest : null;
  }
}

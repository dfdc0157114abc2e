// Shared helpers for driving the app inside jsdom.

export async function waitFor(
  cond: () => boolean,
  label = 'condition',
  timeoutMs = 5000,
): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error(`timed out waiting for ${label}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
}

export function mountRoot(): HTMLElement {
  document.body.innerHTML = '<div id="app"></div>';
  return document.getElementById('app') as HTMLElement;
}

export function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`no element #${id}`);
  return node as T;
}

export function setValue(id: string, value: string): void {
  const input = byId<HTMLInputElement | HTMLTextAreaElement>(id);
  input.value = value;
  input.dispatchEvent(new Event('input', { bubbles: true }));
}

export function click(id: string): void {
  byId<HTMLButtonElement>(id).click();
}

export function bodyText(): string {
  return document.body.textContent ?? '';
}

export function bodyHtml(): string {
  return document.body.innerHTML;
}

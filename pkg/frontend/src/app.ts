// Browser entry point. A worker name plus a hash route picks the view:
// #annotate starts an annotation session, #validate opens the review queue.

import { HttpApi } from './api';
import { AnnotateView } from './annotate';
import { ValidateView } from './validate';

function readWorker(): string {
  const stored = window.sessionStorage.getItem('worker');
  if (stored) return stored;
  // placeholder copy; a real deployment authenticates instead
  const name = window.prompt('Worker name?')?.trim() || 'anonymous';
  window.sessionStorage.setItem('worker', name);
  return name;
}

async function route(root: HTMLElement, api: HttpApi, worker: string): Promise<void> {
  root.textContent = 'Loading...';
  if (window.location.hash === '#validate') {
    const view = new ValidateView(root, api, worker);
    await view.loadNext();
    return;
  }
  const session = await api.startSession(worker);
  new AnnotateView(root, api, session);
}

export function main(): void {
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app element');
  const api = new HttpApi('');
  const worker = readWorker();
  const go = () =>
    void route(root, api, worker).catch((err) => {
      root.textContent = `Something went wrong: ${String(err)}`;
    });
  window.addEventListener('hashchange', go);
  go();
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  main();
}

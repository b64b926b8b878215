/**
 * Backend bootstrap: prefer the wasm backend (XNNPACK SIMD, roughly an
 * order of magnitude faster than the pure-JS cpu backend for conv2d),
 * fall back to cpu if the wasm binary cannot be loaded.
 */
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import { setWasmPaths } from '@tensorflow/tfjs-backend-wasm';

let ready: Promise<string> | null = null;

export function initBackend(prefer: string = 'wasm'): Promise<string> {
  if (!ready) {
    ready = (async () => {
      if (prefer === 'wasm') {
        try {
          const wasmDir = path.dirname(
            require.resolve('@tensorflow/tfjs-backend-wasm/dist/tfjs-backend-wasm.wasm'));
          setWasmPaths(wasmDir + path.sep);
          if (await tf.setBackend('wasm')) {
            await tf.ready();
            return tf.getBackend();
          }
        } catch {
          // fall through to cpu
        }
      }
      await tf.setBackend('cpu');
      await tf.ready();
      return tf.getBackend();
    })();
  }
  return ready;
}

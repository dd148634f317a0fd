#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
放物型シリンダー解析ツール起動スクリプト
"""

import sys

def main():
    """コマンドラインインターフェースを起動します"""
    try:
        from cli import main as cli_main
        return cli_main()
    except KeyboardInterrupt:
        print("中断されました")
        return 130
    except Exception as e:
        print(f"エラー: 解析の実行に失敗しました。{e}")
        import traceback
        traceback.print_exc()
        return 2

if __name__ == "__main__":
    sys.exit(main())

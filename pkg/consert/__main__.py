from consert.cli import main

raise SystemExit(main())
